# -* encoding: utf-8 *-
from typing import Any, Iterator

import pytest

from clinseq import cache, utils
from clinseq.data import Dataset, train_val_test_split
from clinseq.data.synth import generate, COPY_TASK


def pytest_configure(config: Any) -> None:
    config.addinivalue_line("markers", "slow: trains models long enough to check learned behaviour")


@pytest.fixture(autouse=True)
def quiet() -> Iterator[None]:
    utils.init_color(True)
    utils.enable_progressbar = False
    cache.clearcache()
    yield
    cache.clearcache()


@pytest.fixture
def model_dir(tmp_path: Any) -> str:
    return str(tmp_path / "models")


@pytest.fixture
def copy_task() -> Dataset:
    """
    A small raw copy-task cohort with train/val/test folds assigned.
    """
    train, _ = generate(COPY_TASK, n=80, n_test=20, T=8, D=3, lag=2, seed=3)
    return train_val_test_split(train, 0.25, 0.25, seed=0)
