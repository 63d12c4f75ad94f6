# -* encoding: utf-8 *-
import os
from typing import Any

import numpy as np
import pytest

from clinseq import cache, persist
from clinseq.data import Dataset
from clinseq.test.helpers import OffsetModel, with_problem
from clinseq.utils import DataError


def test_arrays_and_header_survive(tmp_path: Any) -> None:
    path = persist.write_arrays(str(tmp_path / "m" / "a.npz"), {"class": "x.Y", "n": 3}, {"w": np.arange(4.0)})
    header, arrays = persist.read_arrays(path)
    assert header == {"class": "x.Y", "n": 3}
    np.testing.assert_array_equal(arrays["w"], np.arange(4.0))
    assert [f for f in os.listdir(str(tmp_path / "m"))] == ["a.npz"]
    with pytest.raises(ValueError):
        persist.write_arrays(path, {}, {"__header__": np.zeros(1)})


def test_unreadable_files(tmp_path: Any) -> None:
    with pytest.raises(DataError, match="does not exist"):
        persist.read_arrays(str(tmp_path / "missing.npz"))
    (tmp_path / "junk.npz").write_bytes(b"not a zip")
    with pytest.raises(DataError):
        persist.read_arrays(str(tmp_path / "junk.npz"))
    path = persist.write_arrays(str(tmp_path / "odd.npz"), {"class": "clinseq.nowhere.Model"}, {})
    with pytest.raises(DataError, match="unknown model class"):
        persist.load_model(path)


def test_cached_models_load_once(copy_task: Dataset, model_dir: str) -> None:
    model = OffsetModel(h=3, model_path=model_dir).fit(with_problem(copy_task))
    path = model.save()
    first = persist.cached_model(path)
    assert persist.cached_model(path) is first
    assert first.h == 3

    # saving again replaces the file and drops the stale entry
    model.h = 4
    model.save(path)
    assert not cache.cached(path)
    assert persist.cached_model(path).h == 4

    cache.clearcache()
    assert not cache.cached(path)
