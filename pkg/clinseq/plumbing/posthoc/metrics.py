# -* encoding: utf-8 *-
from typing import Optional, Tuple

import numpy as np
from sklearn.metrics import roc_auc_score, average_precision_score, mean_squared_error, mean_absolute_error

from clinseq.primitives import MetricName, Direction
from clinseq.utils import ParameterError, highlight


def score(metric: str, y: np.ndarray, p: np.ndarray) -> Tuple[Optional[float], str]:
    """
    Computes ``metric`` over flat label/prediction vectors. Returns ``(None, reason)`` when the metric is
    undefined for these labels (no cells, or a single class for ranking metrics).
    """
    y = np.asarray(y, dtype=float).ravel()
    p = np.asarray(p, dtype=float).ravel()
    if y.shape != p.shape:
        raise ParameterError("Labels %s and predictions %s differ in shape" % (y.shape, p.shape))
    if not len(y):
        return None, "no valid label cells"

    if metric in MetricName.classification:
        if len(np.unique(y)) < 2:
            return None, "only one class present in the labels"
        if metric == MetricName.AUC:
            return float(roc_auc_score(y, p)), ""
        return float(average_precision_score(y, p)), ""
    elif metric == MetricName.MSE:
        return float(mean_squared_error(y, p)), ""
    elif metric == MetricName.MAE:
        return float(mean_absolute_error(y, p)), ""
    elif metric == MetricName.RMSE:
        return float(np.sqrt(mean_squared_error(y, p))), ""
    raise ParameterError("Unknown metric %s (expected one of %s)" % (highlight(metric), ", ".join(MetricName.all)))


def masked_score(metric: str, Y: np.ndarray, M: np.ndarray, P: np.ndarray) -> Optional[float]:
    """
    ``metric`` pooled over all cells with ``M == 1``; ``None`` when undefined.
    """
    valid = M == 1
    value, _ = score(metric, Y[valid], P[valid])
    return value


def stepwise_scores(metric: str, Y: np.ndarray, M: np.ndarray, P: np.ndarray) -> np.ndarray:
    """
    Per-step scores of ``[instance][step][label]`` tensors, pooled over instances and labels. Steps where the
    metric is undefined are NaN.
    """
    t = Y.shape[1]
    out = np.full(t, np.nan)
    for s in range(t):
        value = masked_score(metric, Y[:, s], M[:, s], P[:, s])
        if value is not None:
            out[s] = value
    return out


def better(metric: str, a: float, b: float) -> bool:
    """
    True if ``a`` is strictly better than ``b`` under ``metric``'s direction. NaN is never better.
    """
    if np.isnan(a):
        return False
    if np.isnan(b):
        return True
    return Direction.sign(MetricName.direction(metric)) * (a - b) > 0
