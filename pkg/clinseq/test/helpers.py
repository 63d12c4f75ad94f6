# -* encoding: utf-8 *-
# Dataset builders and stand-in models with known outputs, so optimiser and ensemble logic can be checked without
# training anything.
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.special import expit

from clinseq import persist
from clinseq.base import Predictor, HyperparameterSpace, Dimension, DimensionKinds
from clinseq.data import Dataset, StaticMatrix, TemporalTensor, ProblemSpec, label_steps
from clinseq.plumbing.preprocessing import ProblemMaker
from clinseq.primitives import Task, MetricName


def raw_dataset(values: np.ndarray, seq_len: Optional[Sequence[int]] = None, names: Optional[List[str]] = None,
                static: Optional[np.ndarray] = None, time: Optional[np.ndarray] = None,
                ids: Optional[List[str]] = None) -> Dataset:
    """
    A raw dataset from a ``[instance][step][feature]`` array; NaN cells are unobserved.
    """
    values = np.asarray(values, dtype=float)
    n, t, d = values.shape
    seq_len = np.full(n, t) if seq_len is None else np.asarray(seq_len, dtype=int)
    valid = np.arange(t)[None, :] < seq_len[:, None]
    mask = (np.isfinite(values) & valid[:, :, None]).astype(np.int8)
    if time is None:
        time = np.where(valid, np.arange(t, dtype=float)[None, :], 0.0)
    if static is None:
        static = np.zeros((n, 0))
    static = np.asarray(static, dtype=float)
    return Dataset(
        ids or ["i%d" % i for i in range(n)],
        StaticMatrix(static, np.isfinite(static).astype(np.int8)),
        TemporalTensor(np.where(mask == 1, values, np.nan), mask, time, seq_len),
        ["s%d" % j for j in range(static.shape[1])],
        names or ["f%d" % j for j in range(d)],
    )


def with_problem(dataset: Dataset, label: str = "ventilator", window: int = 2, task: str = Task.CLASSIFICATION,
                 metric: str = MetricName.AUC, problem: str = "online", treatments: Sequence[str] = ()) -> Dataset:
    spec = ProblemSpec(problem=problem, label_names=[label], max_seq_len=dataset.max_len, window=window,
                       treatment_names=list(treatments), task=task, metric=metric)
    return ProblemMaker(spec).fit_transform(dataset)


class LabelStub(Predictor):
    """
    Base of the stand-ins: they read the dataset's own labels, so they only work on problem datasets.
    """
    def _fit(self, dataset: Dataset) -> None:
        spec = dataset.require_problem()
        self.task, self.problem = spec.task, spec.problem

    def save(self, path: Optional[str] = None) -> str:
        header = {"class": persist.class_path(self), "params": self.get_params(), "task": self.task,
                  "problem": self.problem}  # type: Dict[str, Any]
        return persist.write_arrays(path or self.get_path(), header, {})

    @classmethod
    def from_state(cls, header: Dict[str, Any], arrays: Dict[str, np.ndarray], path: str) -> 'LabelStub':
        model = cls(**header["params"])
        model.task, model.problem = header["task"], header["problem"]
        model.fitted = True
        return model


class OffsetModel(LabelStub):
    """
    Predicts the label plus ``h - 5``: its mean squared error is ``(h - 5) ** 2``.
    """
    param_names = ["h", "model_id", "model_path"]

    def __init__(self, h: int = 0, model_id: str = "offset", model_path: str = "tmp") -> None:
        super().__init__(model_id, model_path)
        self.h = h

    def get_hyperparameter_space(self) -> HyperparameterSpace:
        return HyperparameterSpace([Dimension("h", DimensionKinds.DISCRETE, list(range(11)))])

    def _predict_steps(self, dataset: Dataset) -> np.ndarray:
        Y, _ = label_steps(dataset)
        return np.nan_to_num(Y) + (self.h - 5)


class StepOracle(LabelStub):
    """
    Predicts the label at ``good_steps`` and its complement everywhere else: AUC 1 at the good steps, 0 at the
    others.
    """
    param_names = ["good_steps", "model_id", "model_path"]

    def __init__(self, good_steps: Sequence[int] = (), model_id: str = "oracle", model_path: str = "tmp") -> None:
        super().__init__(model_id, model_path)
        self.good_steps = list(good_steps)

    def _predict_steps(self, dataset: Dataset) -> np.ndarray:
        Y, _ = label_steps(dataset)
        Y = np.nan_to_num(Y)
        good = np.isin(np.arange(dataset.max_len), self.good_steps)[None, :, None]
        return np.where(good, Y, 1.0 - Y)


class FeatureReader(LabelStub):
    """
    Predicts ``expit(gain * x)`` from one temporal input feature, chosen from ``features`` by the search. On
    the piecewise-regime cohort with ``window = lag = 0`` the ``x0`` reader is perfect before ``T // 2`` and the
    ``x1`` reader from there on.
    """
    param_names = ["features", "feature", "gain", "model_id", "model_path"]

    def __init__(self, features: Sequence[str] = ("x0", "x1"), feature: Optional[str] = None, gain: float = 1.0,
                 model_id: str = "reader", model_path: str = "tmp") -> None:
        super().__init__(model_id, model_path)
        self.features = list(features)
        self.feature = feature or self.features[0]
        self.gain = gain

    def get_hyperparameter_space(self) -> HyperparameterSpace:
        dims = [Dimension("gain", DimensionKinds.DISCRETE, [1.0, 2.0, 4.0])]
        if len(self.features) > 1:
            dims.append(Dimension("feature", DimensionKinds.CATEGORICAL, self.features))
        return HyperparameterSpace(dims)

    def _predict_steps(self, dataset: Dataset) -> np.ndarray:
        x = np.nan_to_num(dataset.temporal.values[:, :, dataset.temporal_names.index(self.feature)])
        return np.where(dataset.temporal.valid_steps(), expit(self.gain * x), 0.0)[:, :, None]
