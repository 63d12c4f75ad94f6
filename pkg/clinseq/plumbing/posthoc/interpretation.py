# -* encoding: utf-8 *-
from typing import List, Optional, Any

import numpy as np
import pandas as pd

from clinseq.data import Dataset, label_steps
from clinseq.primitives import MetricName, Direction, ProblemKind
from clinseq.plumbing.posthoc.metrics import masked_score
from clinseq.utils import ParameterError, DataError, highlight, print_debug

PERMUTATION = "permutation"
OCCLUSION = "occlusion"


class ImportanceTensor:
    """
    Importance scores and the feature names they refer to. Global importances are ``[feature]`` (with their
    standard errors), instance-wise ones ``[instance][step][feature]`` shaped like the model input.
    """
    def __init__(self, scores: np.ndarray, feature_names: List[str], method: str,
                 stderr: Optional[np.ndarray] = None, ids: Optional[np.ndarray] = None) -> None:
        self.scores = scores
        self.feature_names = list(feature_names)
        self.method = method
        self.stderr = stderr
        self.ids = ids

    @property
    def instancewise(self) -> bool:
        return self.scores.ndim == 3

    def top(self, k: int = 10) -> List[tuple]:
        """
        The ``k`` features with the largest (mean absolute, for instance-wise scores) importance.
        """
        per_feature = np.abs(self.scores).mean(axis=(0, 1)) if self.instancewise else self.scores
        order = np.argsort(-per_feature, kind="stable")[:k]
        return [(self.feature_names[j], float(per_feature[j])) for j in order]

    def to_frame(self) -> pd.DataFrame:
        if not self.instancewise:
            return pd.DataFrame({
                "feature": self.feature_names,
                "importance": self.scores,
                "stderr": self.stderr if self.stderr is not None else np.nan,
            })
        n, t, d = self.scores.shape
        inst, step, feat = np.unravel_index(np.arange(n * t * d), (n, t, d))
        ids = self.ids if self.ids is not None else np.arange(n)
        return pd.DataFrame({
            "id": np.asarray(ids, dtype=object)[inst],
            "step": step,
            "feature": np.asarray(self.feature_names, dtype=object)[feat],
            "importance": self.scores.ravel(),
        })


def _permute_temporal(dataset: Dataset, d: int, rng: np.random.Generator) -> Dataset:
    temporal = dataset.temporal.copy()
    valid = temporal.valid_steps()
    for s in range(dataset.max_len):
        rows = np.flatnonzero(valid[:, s])
        if len(rows) < 2:
            continue
        perm = rng.permutation(rows)
        temporal.values[rows, s, d] = dataset.temporal.values[perm, s, d]
        temporal.observed_mask[rows, s, d] = dataset.temporal.observed_mask[perm, s, d]
    return dataset.replace(temporal=temporal)


def _permute_static(dataset: Dataset, j: int, rng: np.random.Generator) -> Dataset:
    static = dataset.static.copy()
    perm = rng.permutation(dataset.n_instances)
    static.values[:, j] = dataset.static.values[perm, j]
    static.observed_mask[:, j] = dataset.static.observed_mask[perm, j]
    return dataset.replace(static=static)


def interpret_global(model: Any, dataset: Dataset, repeats: int = 5, metric: Optional[str] = None,
                     seed: int = 0) -> ImportanceTensor:
    """
    Permutation importance of every temporal and static feature: the mean drop of ``metric`` (positive means the
    model got worse) over ``repeats`` permutations. Temporal features are permuted across instances within each
    step. Drops are signed, so an irrelevant feature scatters around 0.
    """
    if int(repeats) < 1:
        raise ParameterError("Permutation importance needs repeats >= 1, not %s" % highlight(str(repeats)))
    if not dataset.n_instances:
        raise DataError("Can't compute importances on an empty dataset")
    spec = dataset.require_problem()
    metric = metric or spec.metric
    sign = Direction.sign(MetricName.direction(metric))
    Y, M = label_steps(dataset)
    Y = np.nan_to_num(Y)
    base = masked_score(metric, Y, M, model.predict_steps(dataset))
    if base is None:
        raise DataError("%s is undefined on this dataset, can't measure importances against it" % highlight(metric))

    rng = np.random.default_rng(seed)
    names = list(dataset.temporal_names) + list(dataset.static_names)
    drops = np.full((len(names), int(repeats)), np.nan)
    for j in range(len(names)):
        for r in range(int(repeats)):
            if j < len(dataset.temporal_names):
                permuted = _permute_temporal(dataset, j, rng)
            else:
                permuted = _permute_static(dataset, j - len(dataset.temporal_names), rng)
            value = masked_score(metric, Y, M, model.predict_steps(permuted))
            if value is not None:
                drops[j, r] = sign * (base - value)
    mean = np.nanmean(drops, axis=1)
    stderr = np.nanstd(drops, axis=1, ddof=1) / np.sqrt(repeats) if repeats > 1 else np.zeros(len(names))
    print_debug("Permutation importance over %s features, %s repeats" % (len(names), repeats))
    return ImportanceTensor(mean, names, PERMUTATION, stderr=stderr)


def interpret_instancewise(model: Any, dataset: Dataset, target_step: Optional[int] = None,
                           baseline: Optional[np.ndarray] = None) -> ImportanceTensor:
    """
    Occlusion saliency: the absolute prediction change when one input cell is replaced by its channel's
    baseline (the train mean of that model input). The change is measured at ``target_step`` if given, else
    summed over the outputs the cell can affect: every later valid step online, the final step one-shot.
    """
    if not hasattr(model, "inputs") or not hasattr(model, "predict_inputs"):
        raise ParameterError("Instance-wise importance needs a model exposing its input tensor, %s doesn't" %
                             model.__class__.__name__)
    spec = dataset.require_problem()
    X = model.inputs(dataset)
    n, t, c = X.shape
    valid = dataset.temporal.valid_steps()
    if baseline is None:
        rows = dataset.fit_rows()
        cells = X[rows][valid[rows]]
        baseline = cells.mean(axis=0) if len(cells) else np.zeros(c)
    baseline = np.asarray(baseline, dtype=float)

    steps = np.arange(t)
    if target_step is not None:
        if not 0 <= target_step < t:
            raise ParameterError("target_step %s is outside 0..%s" % (target_step, t - 1))
        outputs = (steps[None, :] == target_step) & valid
    elif spec.problem == ProblemKind.ONE_SHOT:
        outputs = steps[None, :] == (dataset.temporal.seq_len - 1)[:, None]
    else:
        outputs = valid

    base = model.predict_inputs(X)
    scores = np.zeros((n, t, c))
    for s in range(t):
        affected = outputs & (steps[None, :] >= s)
        if not affected[valid[:, s]].any():
            continue
        for ch in range(c):
            occluded = X.copy()
            occluded[:, s, ch] = baseline[ch]
            change = np.abs(model.predict_inputs(occluded) - base).mean(axis=2)
            scores[:, s, ch] = np.where(valid[:, s], np.where(affected, change, 0.0).sum(axis=1), 0.0)

    names = model.layout.channel_names if hasattr(model, "layout") else ["input%d" % i for i in range(c)]
    return ImportanceTensor(scores, names, OCCLUSION, ids=dataset.ids)
