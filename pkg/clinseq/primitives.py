# -* encoding: utf-8 *-

# Shared vocabulary of the pipeline and a few building blocks for configuration layering.
from typing import TypeVar, Dict, Any, List, Optional

from clinseq.utils import ParameterError, highlight


class Fold:
    """
    Instance-level fold tags. Stored as small integers in ``Dataset.fold``.
    """
    UNASSIGNED = 0
    TRAIN = 1
    VAL = 2
    TEST = 3

    names = {
        UNASSIGNED: "unassigned",
        TRAIN: "train",
        VAL: "val",
        TEST: "test",
    }  # type: Dict[int, str]

    @staticmethod
    def parse(fold: Any) -> int:
        if isinstance(fold, str):
            for k, v in Fold.names.items():
                if v == fold.lower():
                    return k
        elif fold in Fold.names:
            return int(fold)
        raise ParameterError("Unknown fold %s (expected one of %s)" %
                             (highlight(str(fold)), ", ".join(Fold.names.values())))


class ProblemKind:
    ONE_SHOT = "one-shot"
    ONLINE = "online"

    all = [ONE_SHOT, ONLINE]


class Task:
    CLASSIFICATION = "classification"
    REGRESSION = "regression"

    all = [CLASSIFICATION, REGRESSION]


class MetricName:
    AUC = "auc"
    APR = "apr"
    MSE = "mse"
    MAE = "mae"
    RMSE = "rmse"

    classification = [AUC, APR]
    regression = [MSE, MAE, RMSE]
    all = classification + regression

    @staticmethod
    def direction(metric: str) -> str:
        if metric in MetricName.classification:
            return Direction.MAXIMIZE
        elif metric in MetricName.regression:
            return Direction.MINIMIZE
        raise ParameterError("Unknown metric %s (expected one of %s)" %
                             (highlight(metric), ", ".join(MetricName.all)))

    @staticmethod
    def task(metric: str) -> str:
        return Task.CLASSIFICATION if MetricName.direction(metric) == Direction.MAXIMIZE else Task.REGRESSION


class Direction:
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"

    @staticmethod
    def sign(direction: str) -> float:
        """
        +1 for maximize, -1 for minimize. Multiplying a score by the sign turns it into "higher is better".
        """
        if direction == Direction.MAXIMIZE:
            return 1.0
        elif direction == Direction.MINIMIZE:
            return -1.0
        raise ParameterError("Unknown direction %s" % highlight(direction))


class Mode:
    """
    How static features and time information enter a sequence model.
    """
    CONCATENATE = "concatenate"
    NONE = "none"

    @staticmethod
    def parse(mode: Optional[str]) -> str:
        if mode is None or str(mode).lower() in ("none", ""):
            return Mode.NONE
        if str(mode).lower() == Mode.CONCATENATE:
            return Mode.CONCATENATE
        raise ParameterError("Unknown mode %s (expected 'concatenate' or 'none')" % highlight(str(mode)))


KT = TypeVar('KT')  # Key type.
VT = TypeVar('VT')  # Value type.


class FallbackDict(Dict[KT, VT]):
    """
    A ``dict`` of configured values layered over a dict of defaults, so a configuration block only names what
    it changes.

    :param update_with: the configured values
    :param fallback_on: if a key is missing from this dict, but exists in ``fallback_on``, the value from
                        ``fallback_on`` is returned. Keep in mind that .keys() and .items() will not enumerate
                        values from ``fallback_on``; use ``resolved()`` to get the merged view.
    """
    def __init__(self, update_with: Optional[Dict[KT, VT]] = None, fallback_on: Optional[Dict[KT, VT]] = None,
                 **kwargs: Any) -> None:
        super().__init__(update_with or {}, **kwargs)
        self.fallback = fallback_on or {}  # type: Dict[KT, VT]

    def __missing__(self, key: KT) -> Optional[VT]:
        if key in self.fallback:
            return self.fallback[key]
        return None

    def unknown_keys(self) -> List[KT]:
        """
        Keys set on this dict that the fallback doesn't know about.
        """
        return [k for k in self.keys() if k not in self.fallback]

    def resolved(self) -> Dict[KT, VT]:
        ret = dict(self.fallback)
        ret.update(self)
        return ret
