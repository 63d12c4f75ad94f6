# -* encoding: utf-8 *-
# Model files are numpy .npz archives with three reserved members: a magic string, a format version and a JSON
# header describing the model (class path, hyperparameters, layout). Every other member is a named array.
import importlib
import json
import os
import tempfile
import zipfile
from typing import Dict, Any, Tuple

import numpy as np

from clinseq import cache
from clinseq.utils import DataError, highlight, print_debug

MAGIC = "clinseq-model"
FORMAT_VERSION = 1

_reserved = ("__magic__", "__version__", "__header__")


def write_arrays(path: str, header: Dict[str, Any], arrays: Dict[str, np.ndarray]) -> str:
    """
    Writes the archive next to its destination and moves it into place, so readers never see a partial file.
    """
    for k in arrays:
        if k in _reserved:
            raise ValueError("Array name %s is reserved" % k)

    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    members = dict(arrays)
    members["__magic__"] = np.array(MAGIC)
    members["__version__"] = np.array(FORMAT_VERSION)
    members["__header__"] = np.array(json.dumps(header, sort_keys=True))

    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".npz.tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            np.savez(f, **members)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    cache.evict(path)
    print_debug("Wrote model file %s" % highlight(path))
    return path


def read_arrays(path: str) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    if not os.path.exists(path):
        raise DataError("Model file %s does not exist" % highlight(path))
    try:
        with np.load(path, allow_pickle=False) as archive:
            if str(archive["__magic__"]) != MAGIC:
                raise DataError("%s is not a model file" % highlight(path))
            version = int(archive["__version__"])
            if version != FORMAT_VERSION:
                raise DataError("Model file %s has format version %s, this version of clinseq reads %s" %
                                (highlight(path), version, FORMAT_VERSION))
            header = json.loads(str(archive["__header__"]))
            arrays = {k: archive[k] for k in archive.files if k not in _reserved}
    except DataError:
        raise
    except (OSError, ValueError, KeyError, EOFError, zipfile.BadZipFile) as e:
        raise DataError("Model file %s is unreadable: %s" % (highlight(path), str(e)))
    return header, arrays


def load_model(path: str) -> Any:
    """
    Loads any persisted model; the class is taken from the file's header and rebuilt with its ``from_state``.
    """
    header, arrays = read_arrays(path)
    try:
        modname, clsname = header["class"].rsplit(".", 1)
        cls = getattr(importlib.import_module(modname), clsname)
    except (KeyError, ValueError, ImportError, AttributeError):
        raise DataError("Model file %s names an unknown model class %s" %
                        (highlight(path), highlight(str(header.get("class")))))
    return cls.from_state(header, arrays, path)


def cached_model(path: str) -> Any:
    """
    ``load_model`` through the process-wide model cache.
    """
    return cache.get_or_load(path, load_model)


def class_path(obj: Any) -> str:
    return "%s.%s" % (obj.__class__.__module__, obj.__class__.__name__)
