# -* encoding: utf-8 *-
from typing import List, Optional, Sequence, Tuple, Any

import numpy as np
import pandas as pd

from clinseq.base import Component, Predictor
from clinseq.data import Dataset, TemporalTensor, label_steps
from clinseq.plumbing.posthoc.metrics import masked_score
from clinseq.utils import ParameterError, DataError, highlight, print_debug, not_builtin

RANDOMIZE = "randomize"
GREEDY_VOI = "greedy-voi"
POLICIES = [RANDOMIZE, GREEDY_VOI]
_external = ["asac", "actor-critic"]

EPS = 1e-9


def _members(predictor: Any) -> List[Predictor]:
    if predictor is None:
        return []
    if hasattr(predictor, "members"):
        return list(predictor.members)
    if isinstance(predictor, (list, tuple)):
        return list(predictor)
    return [predictor]


class SensingPolicy(Component):
    """
    Decides which temporal cells to measure under a per-instance cost budget: the selected cost of an instance
    may not exceed ``budget`` times the cost of measuring every feature at every one of its valid steps. Only
    cells that were actually measured in the data can be selected.

    ``randomize`` takes measurable cells in a seeded random order. ``greedy-voi`` scores each cell by how much
    the ensemble's predictions move when the cell is set to the feature's train 10th vs 90th percentile, and
    takes cells by descending score per unit cost.
    """
    param_names = ["policy", "budget", "cost", "seed"]

    def __init__(self, policy: str = RANDOMIZE, budget: float = 0.5, cost: Optional[Sequence[float]] = None,
                 seed: int = 0, predictor: Any = None) -> None:
        super().__init__()
        name = str(policy).lower()
        if name in _external:
            raise not_builtin("The sensing policy", name, POLICIES)
        if name not in POLICIES:
            raise ParameterError("Unknown sensing policy %s (expected one of %s)" %
                                 (highlight(str(policy)), ", ".join(POLICIES)))
        if not 0 < budget <= 1:
            raise ParameterError("The sensing budget must be in (0, 1], not %s" % highlight(str(budget)))
        self.policy = name
        self.budget = float(budget)
        self.cost = [float(c) for c in cost] if cost is not None else None
        self.seed = int(seed)
        self.members = _members(predictor)
        if self.policy == GREEDY_VOI and len(self.members) < 2:
            raise ParameterError("greedy-voi needs an ensemble of at least 2 fitted models, got %s" %
                                 len(self.members))

        self.feature_names = []  # type: List[str]
        self.costs = np.zeros(0)
        self.low = np.zeros(0)
        self.high = np.zeros(0)
        self.medians = np.zeros(0)

    def _fit(self, dataset: Dataset) -> None:
        d = len(dataset.temporal_names)
        self.feature_names = list(dataset.temporal_names)
        costs = np.ones(d) if self.cost is None else np.asarray(self.cost, dtype=float)
        if costs.shape != (d,):
            raise ParameterError("cost has %s entries for %s temporal features" % (len(costs), d))
        if (costs < 0).any() or not costs.sum() > 0:
            raise ParameterError("Feature costs must be nonnegative and not all zero")
        self.costs = costs

        rows = dataset.fit_rows()
        temporal = dataset.temporal
        values = temporal.values[rows]
        cells = (temporal.observed_mask[rows] == 1) & temporal.valid_steps()[rows][:, :, None]
        self.low = np.zeros(d)
        self.high = np.zeros(d)
        self.medians = np.zeros(d)
        for j in range(d):
            obs = values[:, :, j][cells[:, :, j]]
            if len(obs):
                self.low[j], self.medians[j], self.high[j] = np.percentile(obs, [10, 50, 90])

    def _transform(self, dataset: Dataset) -> Dataset:
        return self.apply(dataset)[0]

    def measurable(self, dataset: Dataset) -> np.ndarray:
        return (dataset.temporal.observed_mask == 1) & dataset.temporal.valid_steps()[:, :, None]

    def scores(self, dataset: Dataset) -> np.ndarray:
        """
        Value-of-information score of every cell ``[instance][step][feature]``: the mean absolute change of the
        ensemble members' predictions at and after the cell's step between the low and the high setting.
        """
        temporal = dataset.temporal
        context = np.where(temporal.observed_mask == 1, temporal.values, self.medians[None, None, :])
        valid = temporal.valid_steps()
        n, t, d = context.shape
        out = np.zeros((n, t, d))
        for s in range(t):
            later = valid[:, s:]
            weight = np.maximum(later.sum(axis=1), 1)
            for j in range(d):
                spread = np.zeros(n)
                for model in self.members:
                    preds = []
                    for setting in (self.low[j], self.high[j]):
                        values = context.copy()
                        values[:, s, j] = setting
                        variant = dataset.replace(temporal=TemporalTensor(
                            values, np.ones_like(temporal.observed_mask), temporal.time, temporal.seq_len))
                        preds.append(model.predict_steps(variant)[:, s:])
                    change = np.abs(preds[1] - preds[0]).mean(axis=2)
                    spread += np.where(later, change, 0.0).sum(axis=1) / weight
                out[:, s, j] = spread / len(self.members)
        return out

    def select(self, dataset: Dataset) -> np.ndarray:
        """
        The selection mask ``[instance][step][feature]`` (int8).
        """
        self.check_fitted()
        if list(dataset.temporal_names) != self.feature_names:
            raise ParameterError("The sensing policy was fitted on features %s, the dataset has %s" %
                                 (", ".join(self.feature_names), ", ".join(dataset.temporal_names)))
        measurable = self.measurable(dataset)
        n, t, d = measurable.shape
        cell_cost = np.broadcast_to(self.costs, (t, d)).ravel()
        voi = self.scores(dataset) if self.policy == GREEDY_VOI else None

        selection = np.zeros((n, t, d), dtype=np.int8)
        for i in range(n):
            steps = int(dataset.temporal.seq_len[i])
            limit = self.budget * self.costs.sum() * steps + EPS
            candidates = np.flatnonzero(measurable[i].ravel())
            if self.policy == RANDOMIZE:
                order = np.random.default_rng([self.seed, i]).permutation(candidates)
            else:
                ratio = voi[i].ravel()[candidates] / np.maximum(cell_cost[candidates], EPS)  # type: ignore
                order = candidates[np.argsort(-ratio, kind="stable")]
            spent = 0.0
            chosen = selection[i].reshape(-1)
            for cell in order:
                if spent + cell_cost[cell] <= limit:
                    spent += cell_cost[cell]
                    chosen[cell] = 1
        print_debug("Sensing policy %s selected %s of %s measured cells" %
                    (highlight(self.policy), int(selection.sum()), int(measurable.sum())))
        return selection

    def apply(self, dataset: Dataset) -> Tuple[Dataset, np.ndarray]:
        """
        The dataset reduced to the selected cells, and the selection mask.
        """
        selection = self.select(dataset)
        temporal = dataset.temporal.copy()
        temporal.observed_mask = selection.copy()
        temporal.values = np.where(selection == 1, temporal.values, np.nan)
        return dataset.replace(temporal=temporal), selection


def fit_sensing_policy(policy: str, dataset: Dataset, predictor: Any = None, budget: float = 0.5,
                       cost: Optional[Sequence[float]] = None, seed: int = 0) -> SensingPolicy:
    state = SensingPolicy(policy, budget, cost, seed, predictor)
    state.fit(dataset)
    return state


def apply_sensing(state: SensingPolicy, dataset: Dataset) -> Tuple[Dataset, np.ndarray]:
    return state.apply(dataset)


def evaluate_sensing(state: SensingPolicy, dataset: Dataset, imputer: Component, predictor: Predictor,
                     metric: Optional[str] = None) -> Tuple[Optional[float], np.ndarray]:
    """
    Masks ``dataset`` with the policy, re-imputes it with the fitted temporal ``imputer`` and scores
    ``predictor`` against the dataset's labels. Returns the pooled score and the selection.
    """
    spec = dataset.require_problem()
    masked, selection = state.apply(dataset)
    filled = imputer.transform(masked)
    Y, M = label_steps(dataset)
    value = masked_score(metric or spec.metric, np.nan_to_num(Y), M, predictor.predict_steps(filled))
    return value, selection


def export_selection(selection: np.ndarray, dataset: Dataset, path: str) -> str:
    """
    Writes the selection of every valid cell as CSV ``id,time,variable,selected``.
    """
    if selection.shape != dataset.temporal.values.shape:
        raise DataError("Selection %s does not match the dataset's temporal shape %s" %
                        (selection.shape, dataset.temporal.values.shape))
    inst, step, feat = np.nonzero(np.broadcast_to(dataset.temporal.valid_steps()[:, :, None], selection.shape))
    frame = pd.DataFrame({
        "id": np.asarray(dataset.ids, dtype=object)[inst],
        "time": dataset.temporal.time[inst, step],
        "variable": np.asarray(dataset.temporal_names, dtype=object)[feat],
        "selected": selection[inst, step, feat].astype(int),
    })
    frame.to_csv(path, index=False)
    return path
