# -* encoding: utf-8 *-
# Synthetic stand-ins for clinical cohorts. Every generator produces raw datasets (static + temporal, no problem
# attached) whose label feature follows a known rule, so the best achievable score is known.
import os
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from clinseq.data import Dataset, StaticMatrix, TemporalTensor
from clinseq.data.loader import write_csv
from clinseq.primitives import Task
from clinseq.utils import ParameterError, highlight, print_info

COPY_TASK = "copy-task"
PIECEWISE_REGIME = "piecewise-regime"
SIGNAL_NOISE = "signal-noise"
TREATMENT_RULE = "treatment-rule"

LABEL_NAME = "ventilator"
TREATMENT_NAME = "treatment"
ADMISSION_TYPES = ["elective", "emergency", "urgent"]

# (inputs [n][T][D], label [n][T], actions [n][T] or None)
Signals = Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]


def _lagged(x: np.ndarray, lag: int) -> np.ndarray:
    """
    ``x`` shifted ``lag`` steps later along axis 1; the first ``lag`` steps come from the burn-in columns.
    """
    return x[:, :-lag] if lag else x


def _threshold(signal: np.ndarray, noise: float, rng: np.random.Generator, task: str) -> np.ndarray:
    if task == Task.REGRESSION:
        return signal + noise * rng.standard_normal(signal.shape)
    y = (signal > 0).astype(float)
    flip = rng.random(signal.shape) < noise
    return np.where(flip, 1.0 - y, y)


def copy_task(rng: np.random.Generator, n: int, T: int, D: int, lag: int, noise: float, task: str) -> Signals:
    """
    ``ventilator[t] = 1[x0[t - lag] > 0]`` (the raw value for regression). With ``window = lag`` the target at
    step ``t`` is ``x0[t]``, so a model that reads its input perfectly reaches AUC 1.0 without noise or
    missingness; with label flips at rate ``noise`` the best AUC is ``1 - noise``.
    """
    x = rng.standard_normal((n, T + lag, D))
    y = _threshold(_lagged(x[:, :, 0], lag), noise, rng, task)
    return x[:, lag:], y, None


def piecewise_regime(rng: np.random.Generator, n: int, T: int, D: int, lag: int, noise: float,
                     task: str) -> Signals:
    """
    Like the copy task, but the label follows ``x0`` for steps ``t < T // 2`` and ``x1`` from step ``T // 2`` on.
    A model class that only reads one of the two features is best on one half of the steps.
    """
    if D < 2:
        raise ParameterError("piecewise-regime needs at least two input features")
    x = rng.standard_normal((n, T + lag, D))
    first, second = _lagged(x[:, :, 0], lag), _lagged(x[:, :, 1], lag)
    signal = np.where(np.arange(T)[None, :] < T // 2, first, second)
    return x[:, lag:], _threshold(signal, noise, rng, task), None


def signal_noise(rng: np.random.Generator, n: int, T: int, D: int, lag: int, noise: float, task: str) -> Signals:
    """
    The label is the sign of ``x0 + x1`` ``lag`` steps earlier; the other features are pure noise. Selection and
    importance methods should rank ``x0`` and ``x1`` first.
    """
    if D < 3:
        raise ParameterError("signal-noise needs at least three input features")
    x = rng.standard_normal((n, T + lag, D))
    signal = _lagged(x[:, :, 0] + x[:, :, 1], lag)
    return x[:, lag:], _threshold(signal, noise, rng, task), None


def treatment_rule(rng: np.random.Generator, n: int, T: int, D: int, lag: int, noise: float,
                   task: str) -> Signals:
    """
    Random binary treatments ``a[t]`` and ``ventilator[t + 1] = a[t]`` (``ventilator[0] = 0``); the covariates are
    noise. Factual replay is exact and flipping a planned action flips the next outcome.
    """
    x = rng.standard_normal((n, T, D))
    a = (rng.random((n, T)) < 0.5).astype(float)
    y = np.zeros((n, T))
    y[:, 1:] = a[:, :-1]
    if noise:
        y = _threshold(y - 0.5 if task == Task.CLASSIFICATION else y, noise, rng, task)
    return x, y, a


GENERATORS = {
    COPY_TASK: copy_task,
    PIECEWISE_REGIME: piecewise_regime,
    SIGNAL_NOISE: signal_noise,
    TREATMENT_RULE: treatment_rule,
}  # type: Dict[str, Callable[..., Signals]]


def _build(rng: np.random.Generator, ids: List[str], signals: Signals, D: int, missing_rate: float,
           min_len: int) -> Dataset:
    x, y, a = signals
    n, T = y.shape
    seq_len = rng.integers(min_len, T + 1, size=n) if min_len < T else np.full(n, T)
    valid = np.arange(T)[None, :] < seq_len[:, None]

    names = ["x%d" % d for d in range(D)] + [LABEL_NAME]
    columns = [x, y[:, :, None]]
    if a is not None:
        names.append(TREATMENT_NAME)
        columns.append(a[:, :, None])
    values = np.concatenate(columns, axis=2)
    mask = np.repeat(valid[:, :, None], len(names), axis=2).astype(np.int8)
    # label and treatment features are always recorded
    drop = rng.random((n, T, D)) < missing_rate
    mask[:, :, :D][drop] = 0
    values = np.where(mask == 1, values, np.nan)
    time = np.where(valid, np.arange(T, dtype=float)[None, :], 0.0)

    age = rng.integers(18, 91, size=n).astype(float)
    admission = rng.integers(0, len(ADMISSION_TYPES), size=n).astype(float)
    static_mask = np.ones((n, 2), dtype=np.int8)
    static_mask[:, 0] = rng.random(n) >= missing_rate
    static = np.stack([np.where(static_mask[:, 0] == 1, age, np.nan), admission], axis=1)
    return Dataset(ids, StaticMatrix(static, static_mask), TemporalTensor(values, mask, time, seq_len),
                   ["age", "admission_type"], names, static_categories={"admission_type": list(ADMISSION_TYPES)})


def generate(generator: str, n: int = 1000, n_test: Optional[int] = None, T: int = 24, D: int = 5,
             missing_rate: float = 0.0, noise: float = 0.0, lag: int = 4, seed: int = 0,
             min_len: Optional[int] = None, task: str = Task.CLASSIFICATION) -> Tuple[Dataset, Dataset]:
    """
    Raw train and test datasets from the named generator. ``missing_rate`` drops input cells (covariates and the
    static ``age``) independently; label and treatment features are always observed. Sequence lengths are drawn
    uniformly from ``[min_len, T]`` (all ``T`` by default).
    """
    if generator not in GENERATORS:
        raise ParameterError("Unknown generator %s (expected one of %s)" %
                             (highlight(str(generator)), ", ".join(GENERATORS)))
    n_test = n // 4 if n_test is None else n_test
    min_len = T if min_len is None else min_len
    if n < 1 or n_test < 1:
        raise ParameterError("Generators need at least one train and one test instance")
    if T < 2 or D < 1:
        raise ParameterError("Generators need T >= 2 and D >= 1 (T=%s, D=%s)" % (T, D))
    if not 0 <= missing_rate < 1:
        raise ParameterError("missing_rate must be in [0, 1), not %s" % highlight(str(missing_rate)))
    if not 0 <= noise:
        raise ParameterError("noise must be nonnegative, not %s" % highlight(str(noise)))
    if not 0 <= lag < T:
        raise ParameterError("lag must be in [0, T), not %s" % highlight(str(lag)))
    if not 1 <= min_len <= T:
        raise ParameterError("min_len must be in [1, T], not %s" % highlight(str(min_len)))
    if task not in Task.all:
        raise ParameterError("Unknown task %s" % highlight(str(task)))

    rng = np.random.default_rng(seed)
    signals = GENERATORS[generator](rng, n + n_test, T, D, lag, noise, task)
    data = _build(rng, ["p%05d" % i for i in range(n + n_test)], signals, D, missing_rate, min_len)
    return data.subset(np.arange(n)), data.subset(np.arange(n, n + n_test))


def file_names(name: str) -> Dict[str, str]:
    return {
        "static_train": "%s_static_train_data.csv.gz" % name,
        "temporal_train": "%s_temporal_train_data_eav.csv.gz" % name,
        "static_test": "%s_static_test_data.csv.gz" % name,
        "temporal_test": "%s_temporal_test_data_eav.csv.gz" % name,
    }


def synth(generator: str, out_dir: str, name: Optional[str] = None, **params: object) -> Dict[str, str]:
    """
    Writes ``<name>_static_{train,test}_data.csv.gz`` and ``<name>_temporal_{train,test}_data_eav.csv.gz`` to
    ``out_dir`` and returns their paths keyed like the ``data`` block of a run configuration.
    """
    train, test = generate(generator, **params)  # type: ignore
    os.makedirs(out_dir, exist_ok=True)
    paths = {k: os.path.join(out_dir, v) for k, v in file_names(name or generator.replace("-", "_")).items()}
    write_csv(train, paths["static_train"], paths["temporal_train"])
    write_csv(test, paths["static_test"], paths["temporal_test"])
    print_info("Wrote %s train and %s test instances to %s" % (train.n_instances, test.n_instances,
                                                               highlight(out_dir)))
    return paths
