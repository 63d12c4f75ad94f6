# -* encoding: utf-8 *-
import threading
import time
from types import TracebackType
from typing import Callable, Any, List, Optional, Type, Tuple

import aspectlib
from wrapt import synchronized

from clinseq.utils import print_debug, highlight


# ----
# Optimisers promise that the number of model trainings equals the declared iteration budget. Rather than
# trusting every code path to count correctly, the fit calls of candidate models are proxied through an aspect
# that records each top-level training run in a ledger.
# ----


class StackDepthWatcher:
    """
    Per-thread call depth, so fits that happen inside another recorded fit (ensemble members, an encoder inside
    a treatment model) are not counted twice.
    """
    def __init__(self) -> None:
        self.store = threading.local()

    def __enter__(self) -> int:
        cur = getattr(self.store, "depth", 0)
        self.store.depth = cur + 1
        return cur

    def __exit__(self, exc_type: Optional[Type[BaseException]], exc_val: Optional[BaseException],
                 exc_tb: Optional[TracebackType]) -> bool:
        self.store.depth -= 1
        return False


stackdepth = StackDepthWatcher()


class TrainingLedger:
    """
    Append-only record of training runs: ``(label, seconds)`` in completion order.
    """
    def __init__(self) -> None:
        self.entries = []  # type: List[Tuple[str, float]]

    @synchronized
    def record(self, label: str, seconds: float) -> None:
        self.entries.append((label, seconds))

    @property
    def runs(self) -> int:
        return len(self.entries)

    @property
    def seconds(self) -> float:
        return sum(s for _, s in self.entries)

    def counted(self, fit: Callable[..., Any], label: str = "") -> Callable[..., Any]:
        """
        Returns ``fit`` proxied through an aspect that records the call in this ledger.
        """
        ledger = self

        @aspectlib.Aspect(bind=True)
        def record_training(cutpoint: Callable[..., Any], *args: Any, **kwargs: Any) -> Any:
            with stackdepth as depth:
                started = time.perf_counter()
                result = yield aspectlib.Proceed
                if depth == 0:
                    elapsed = time.perf_counter() - started
                    print_debug("Training run %s took %.2fs" % (highlight(label or str(cutpoint)), elapsed))
                    ledger.record(label, elapsed)
                yield aspectlib.Return(result)

        return record_training(fit)
