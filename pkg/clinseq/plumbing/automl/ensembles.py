# -* encoding: utf-8 *-
from typing import Dict, Any, List, Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize_scalar

from clinseq import persist
from clinseq.base import Predictor
from clinseq.data import Dataset, label_steps
from clinseq.primitives import Fold, MetricName, Direction, ProblemKind, Task
from clinseq.utils import ParameterError, DataError, highlight, print_debug

Member = Union[str, Predictor]


def _resolve(member: Member) -> Predictor:
    if isinstance(member, Predictor):
        return member
    return persist.cached_model(member)


def best_per_step(scores: np.ndarray, metric: str) -> np.ndarray:
    """
    Index of the best model per step column of ``scores`` ``[model][step]``. Ties go to the lower index;
    columns without any defined score pick the model with the best mean score.
    """
    key = Direction.sign(MetricName.direction(metric)) * np.asarray(scores, dtype=float)
    key = np.where(np.isnan(key), -np.inf, key)
    choice = np.argmax(key, axis=0)
    undefined = np.isinf(key).all(axis=0)
    if undefined.any():
        with np.errstate(invalid="ignore"):
            means = np.nanmean(np.where(np.isinf(key), np.nan, key), axis=1)
        fallback = int(np.argmax(np.where(np.isnan(means), -np.inf, means)))
        choice[undefined] = fallback
    return choice


class StepwiseEnsemble(Predictor):
    """
    Answers each step with the model that had the best validation score at that step. Members are persisted
    model paths, loaded on first use, or fitted models. Steps past the scored ones reuse the last step's choice.
    """
    param_names = ["model_id", "model_path"]

    def __init__(self, members: Sequence[Member], scores: np.ndarray, metric: str, task: Optional[str] = None,
                 problem: Optional[str] = None, model_id: str = "stepwise", model_path: str = "tmp") -> None:
        super().__init__(model_id, model_path)
        if not len(members):
            raise ParameterError("A stepwise ensemble needs at least one model")
        scores = np.atleast_2d(np.asarray(scores, dtype=float))
        if scores.shape[0] != len(members):
            raise ParameterError("Score matrix has %s rows for %s models" % (scores.shape[0], len(members)))
        self.members = list(members)
        self.scores = scores
        self.metric = metric
        self.choice = best_per_step(scores, metric)
        self.task, self.problem = task, problem
        if self.task is None or self.problem is None:
            first = _resolve(self.members[0])
            self.task, self.problem = first.task, first.problem
        self.fitted = True

    def new(self, model_id: Optional[str] = None) -> 'StepwiseEnsemble':
        return StepwiseEnsemble(self.members, self.scores, self.metric, self.task, self.problem,
                                model_id or self.model_id, self.model_path)

    def _fit(self, dataset: Dataset) -> None:
        pass

    def step_scores(self) -> np.ndarray:
        """
        The ensemble's validation score per step: the chosen model's score.
        """
        return self.scores[self.choice, np.arange(self.scores.shape[1])]

    def _predict_steps(self, dataset: Dataset) -> np.ndarray:
        t = dataset.max_len
        choice = np.array([self.choice[min(s, len(self.choice) - 1)] for s in range(t)])
        out = None  # type: Optional[np.ndarray]
        for m in np.unique(choice):
            preds = _resolve(self.members[m]).predict_steps(dataset)
            if out is None:
                out = np.zeros_like(preds)
            cols = choice == m
            out[:, cols] = preds[:, cols]
        return out  # type: ignore

    def member_paths(self) -> List[str]:
        return [m if isinstance(m, str) else m.save() for m in self.members]

    def save(self, path: Optional[str] = None) -> str:
        header = {
            "class": persist.class_path(self),
            "params": self.get_params(),
            "members": self.member_paths(),
            "metric": self.metric,
            "task": self.task,
            "problem": self.problem,
        }  # type: Dict[str, Any]
        return persist.write_arrays(path or self.get_path(), header, {"scores": self.scores})

    @classmethod
    def from_state(cls, header: Dict[str, Any], arrays: Dict[str, np.ndarray], path: str) -> 'StepwiseEnsemble':
        return cls(header["members"], arrays["scores"], header["metric"], header["task"], header["problem"],
                   **header["params"])


def build_stepwise_ensemble(models: Sequence[Member], scores: np.ndarray, metric: str,
                            model_id: str = "stepwise", model_path: str = "tmp") -> StepwiseEnsemble:
    ensemble = StepwiseEnsemble(models, scores, metric, model_id=model_id, model_path=model_path)
    print_debug("Stepwise ensemble picks models %s" % ", ".join(str(c) for c in ensemble.choice))
    return ensemble


def _task_loss(p: np.ndarray, y: np.ndarray, task: str) -> float:
    if task == Task.CLASSIFICATION:
        q = np.clip(p, 1e-12, 1 - 1e-12)
        return float(-(y * np.log(q) + (1 - y) * np.log(1 - q)).mean())
    return float(((p - y) ** 2).mean())


def convex_weights(P: np.ndarray, y: np.ndarray, task: str, sweeps: int = 50, tol: float = 1e-10) -> np.ndarray:
    """
    Convex combination weights of the columns of ``P`` ``[cell][member]`` minimising the task loss, by coordinate
    descent: each move shifts mass between one member and the (renormalised) rest.
    """
    k = P.shape[1]
    w = np.full(k, 1.0 / k)
    if k == 1 or not len(y):
        return w
    current = _task_loss(P @ w, y, task)
    for _ in range(sweeps):
        before = current
        for j in range(k):
            rest = w.copy()
            rest[j] = 0.0
            rest = rest / rest.sum() if rest.sum() > 0 else np.where(np.arange(k) == j, 0.0, 1.0 / (k - 1))
            e = np.zeros(k)
            e[j] = 1.0
            res = minimize_scalar(lambda a: _task_loss(P @ ((1 - a) * rest + a * e), y, task),
                                  bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-8})
            if res.fun < current:
                w = (1 - res.x) * rest + res.x * e
                current = float(res.fun)
        if before - current < tol:
            break
    w = np.maximum(w, 0.0)
    return w / w.sum()


class StackingEnsemble(Predictor):
    """
    A convex combination of member predictions, fitted on the validation fold. Online problems get one weight
    vector per step, one-shot problems a single one.
    """
    param_names = ["model_id", "model_path"]

    def __init__(self, members: Sequence[Member], model_id: str = "stacking", model_path: str = "tmp") -> None:
        super().__init__(model_id, model_path)
        if not len(members):
            raise ParameterError("A stacking ensemble needs at least one member")
        self.members = list(members)
        self.weights = np.zeros((0, len(members)))

    def new(self, model_id: Optional[str] = None) -> 'StackingEnsemble':
        return StackingEnsemble(self.members, model_id or self.model_id, self.model_path)

    def _member_steps(self, dataset: Dataset) -> np.ndarray:
        return np.stack([_resolve(m).predict_steps(dataset) for m in self.members], axis=-1)

    def _fit(self, dataset: Dataset) -> None:
        spec = dataset.require_problem()
        val = dataset.fold_indices(Fold.VAL)
        if not len(val):
            raise DataError("Can't fit %s: the validation fold is empty" % highlight(self.model_id))
        self.task, self.problem = spec.task, spec.problem
        view = dataset.subset(val)
        P = self._member_steps(view)  # [instance][step][label][member]
        Y, M = label_steps(view)
        Y = np.nan_to_num(Y)
        k = len(self.members)
        if spec.problem == ProblemKind.ONE_SHOT:
            valid = M == 1
            self.weights = convex_weights(P[valid], Y[valid], spec.task)[None, :]
        else:
            self.weights = np.full((view.max_len, k), 1.0 / k)
            for s in range(view.max_len):
                valid = M[:, s] == 1
                if valid.any():
                    self.weights[s] = convex_weights(P[:, s][valid], Y[:, s][valid], spec.task)
        print_debug("Stacking weights of %s: %s" % (highlight(self.model_id), np.round(self.weights.mean(axis=0), 3)))

    def _predict_steps(self, dataset: Dataset) -> np.ndarray:
        P = self._member_steps(dataset)
        t = P.shape[1]
        rows = np.minimum(np.arange(t), len(self.weights) - 1)
        return (P * self.weights[rows][None, :, None, :]).sum(axis=-1)

    def save(self, path: Optional[str] = None) -> str:
        self.check_fitted()
        header = {
            "class": persist.class_path(self),
            "params": self.get_params(),
            "members": [m if isinstance(m, str) else m.save() for m in self.members],
            "task": self.task,
            "problem": self.problem,
        }  # type: Dict[str, Any]
        return persist.write_arrays(path or self.get_path(), header, {"weights": self.weights})

    @classmethod
    def from_state(cls, header: Dict[str, Any], arrays: Dict[str, np.ndarray], path: str) -> 'StackingEnsemble':
        model = cls(header["members"], **header["params"])
        model.weights = np.array(arrays["weights"], dtype=float)
        model.task, model.problem = header["task"], header["problem"]
        model.fitted = True
        return model


def build_stacking_ensemble(members: Sequence[Member], dataset: Dataset, model_id: str = "stacking",
                            model_path: str = "tmp") -> StackingEnsemble:
    ensemble = StackingEnsemble(members, model_id, model_path)
    ensemble.fit(dataset)
    return ensemble
