# -* encoding: utf-8 *-
# Process-wide store for persisted models, so composite models can reference their members by file path and
# load each of them once. An entry remembers the file's modification time and is reloaded when the file changes.
import os
import threading
from typing import Dict, Callable, Any, Tuple

from wrapt import synchronized

from clinseq.utils import print_debug

_lock = threading.RLock()
_models = {}  # type: Dict[str, Tuple[float, Any]]


def _key(path: str) -> str:
    return os.path.abspath(path)


@synchronized(_lock)
def clearcache() -> None:
    _models.clear()


@synchronized(_lock)
def evict(path: str) -> None:
    _models.pop(_key(path), None)


def cached(path: str) -> bool:
    return _key(path) in _models


@synchronized(_lock)
def get_or_load(path: str, load: Callable[[str], Any]) -> Any:
    key = _key(path)
    mtime = os.path.getmtime(key) if os.path.exists(key) else -1.0
    if key in _models and _models[key][0] == mtime:
        return _models[key][1]
    model = load(path)
    if model is None:
        raise ValueError("Loading %s returned nothing" % path)
    _models[key] = (mtime, model)
    print_debug("Cached model %s" % key)
    return model
