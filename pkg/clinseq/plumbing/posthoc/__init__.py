# -* encoding: utf-8 *-
import json
from typing import Dict, Any, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from clinseq.data import Dataset, LabelTensor
from clinseq.primitives import MetricName, ProblemKind
from clinseq.plumbing.posthoc.metrics import score, stepwise_scores
from clinseq.utils import ParameterError, highlight

MICRO = "micro"
MACRO = "macro"

METRIC_TITLES = {
    MetricName.AUC: "AUROC",
    MetricName.APR: "average precision",
    MetricName.MSE: "mean squared error",
    MetricName.MAE: "mean absolute error",
    MetricName.RMSE: "root mean squared error",
}


class MetricReport:
    """
    Point estimates per metric, pooled over all labels, plus the same per label. A metric that is undefined for
    the labels (a single class, say) is absent from ``values`` and explained in ``reasons``. Reports of repeated
    runs are merged with ``combine``, which keeps every run's value in ``repeats``.
    """
    def __init__(self, values: Dict[str, float], per_label: Dict[str, Dict[str, float]],
                 reasons: Dict[str, str], *, problem: str, label_names: Sequence[str], average: str = MICRO,
                 repeats: Optional[Dict[str, List[Optional[float]]]] = None) -> None:
        self.values = values
        self.per_label = per_label
        self.reasons = reasons
        self.problem = problem
        self.label_names = list(label_names)
        self.average = average
        self.repeats = repeats or {}

    def __getitem__(self, metric: str) -> float:
        return self.values[metric]

    def __contains__(self, metric: str) -> bool:
        return metric in self.values

    def get(self, metric: str) -> Optional[float]:
        return self.values.get(metric)

    @staticmethod
    def combine(reports: List['MetricReport']) -> 'MetricReport':
        if not reports:
            raise ParameterError("Can't combine an empty list of metric reports")
        first = reports[0]
        metrics = sorted(set(m for r in reports for m in list(r.values) + list(r.reasons)))
        repeats = {m: [r.values.get(m) for r in reports] for m in metrics}
        values = {}  # type: Dict[str, float]
        reasons = {}  # type: Dict[str, str]
        for m in metrics:
            defined = [v for v in repeats[m] if v is not None]
            if defined:
                values[m] = float(np.mean(defined))
            else:
                reasons[m] = next(r.reasons[m] for r in reports if m in r.reasons)
        return MetricReport(values, first.per_label, reasons, problem=first.problem, label_names=first.label_names,
                            average=first.average, repeats=repeats)

    def todict(self) -> Dict[str, Any]:
        ret = {
            "problem": self.problem,
            "labels": self.label_names,
            "average": self.average,
            "metrics": {m: self.values[m] for m in sorted(self.values)},
            "per_label": {label: {m: v[m] for m in sorted(v)} for label, v in self.per_label.items()},
        }  # type: Dict[str, Any]
        if self.reasons:
            ret["undefined"] = {m: self.reasons[m] for m in sorted(self.reasons)}
        if self.repeats:
            ret["repeats"] = {m: self.repeats[m] for m in sorted(self.repeats)}
            ret["std"] = {m: float(np.std([v for v in self.repeats[m] if v is not None]))
                          for m in sorted(self.repeats) if any(v is not None for v in self.repeats[m])}
        return ret

    @staticmethod
    def fromdict(d: Dict[str, Any]) -> 'MetricReport':
        return MetricReport(dict(d["metrics"]), dict(d.get("per_label", {})), dict(d.get("undefined", {})),
                            problem=d["problem"], label_names=d["labels"], average=d.get("average", MICRO),
                            repeats=d.get("repeats"))

    def tojson(self) -> str:
        return json.dumps(self.todict(), indent=2, sort_keys=True)

    def __repr__(self) -> str:
        return "MetricReport<%s>" % ", ".join("%s=%.4f" % (m, v) for m, v in sorted(self.values.items()))


def as_steps(values: np.ndarray, mask: Optional[np.ndarray] = None) -> tuple:
    """
    Lifts one-shot ``[instance][label]`` arrays to a single step so both problem kinds score the same way.
    """
    values = np.asarray(values, dtype=float)
    if mask is None:
        mask = np.isfinite(values).astype(np.int8)
    if values.ndim == 2:
        return values[:, None, :], np.asarray(mask)[:, None, :]
    return values, np.asarray(mask)


def _aggregate(metric: str, Y: np.ndarray, M: np.ndarray, P: np.ndarray, average: str) -> tuple:
    if average == MICRO:
        valid = M == 1
        return score(metric, Y[valid], P[valid])
    per_step = stepwise_scores(metric, Y, M, P)
    if np.isnan(per_step).all():
        return None, "undefined at every step"
    return float(np.nanmean(per_step)), ""


def evaluate(labels: Union[LabelTensor, Dataset], predictions: np.ndarray, metrics: Optional[Sequence[str]] = None,
             average: str = MICRO, label_names: Optional[Sequence[str]] = None) -> MetricReport:
    """
    Scores ``predictions`` (shaped like the label values) on the valid label cells. ``micro`` pools every valid
    (instance, step) cell; ``macro`` averages the per-step scores over the steps where the metric is defined.
    Given a ``Dataset``, metrics default to its problem's metric.
    """
    if average not in (MICRO, MACRO):
        raise ParameterError("average must be micro or macro, not %s" % highlight(str(average)))
    if isinstance(labels, Dataset):
        spec = labels.require_problem()
        metrics = metrics or [spec.metric]
        label_names = label_names or labels.label_names
        labels = labels.labels  # type: ignore
    if not metrics:
        raise ParameterError("No metrics to evaluate")
    for m in metrics:
        MetricName.direction(m)

    predictions = np.asarray(predictions, dtype=float)
    if predictions.shape != labels.values.shape:  # type: ignore
        raise ParameterError("Predictions %s don't match labels %s" %
                             (predictions.shape, labels.values.shape))  # type: ignore
    Y, M = as_steps(np.nan_to_num(labels.values), labels.valid_mask)  # type: ignore
    P, _ = as_steps(predictions, labels.valid_mask)  # type: ignore
    names = list(label_names or ["label%d" % j for j in range(Y.shape[2])])

    values = {}  # type: Dict[str, float]
    reasons = {}  # type: Dict[str, str]
    per_label = {name: {} for name in names}  # type: Dict[str, Dict[str, float]]
    for m in metrics:
        value, reason = _aggregate(m, Y, M, P, average)
        if value is None:
            reasons[m] = reason
        else:
            values[m] = value
        for j, name in enumerate(names):
            v, _ = _aggregate(m, Y[:, :, j:j + 1], M[:, :, j:j + 1], P[:, :, j:j + 1], average)
            if v is not None:
                per_label[name][m] = v
    problem = ProblemKind.ONLINE if labels.online else ProblemKind.ONE_SHOT  # type: ignore
    return MetricReport(values, per_label, reasons, problem=problem, label_names=names, average=average)


def prediction_frame(dataset: Dataset, predictions: np.ndarray, lower: Optional[np.ndarray] = None,
                     upper: Optional[np.ndarray] = None) -> pd.DataFrame:
    """
    Long-format predictions ``id,step,label,prediction,lower,upper`` for every valid step (one-shot problems:
    the final valid step). ``label`` is the label name; bounds are empty without an uncertainty estimate.
    """
    spec = dataset.require_problem()
    P = np.asarray(predictions, dtype=float)
    ids = np.asarray(dataset.ids, dtype=object)
    if P.ndim == 2:
        inst = np.flatnonzero(dataset.temporal.seq_len > 0)
        step = dataset.temporal.seq_len[inst] - 1
        cells = (inst,)
    else:
        inst, step = np.nonzero(dataset.temporal.valid_steps())
        cells = (inst, step)

    frames = []
    for j, name in enumerate(spec.label_names):
        index = cells + (j,)
        frames.append(pd.DataFrame({
            "id": ids[inst],
            "step": step,
            "label": name,
            "prediction": P[index],
            "lower": np.asarray(lower, dtype=float)[index] if lower is not None else np.nan,
            "upper": np.asarray(upper, dtype=float)[index] if upper is not None else np.nan,
        }))
    if not frames:
        return pd.DataFrame(columns=["id", "step", "label", "prediction", "lower", "upper"])
    return pd.concat(frames, ignore_index=True)


from clinseq.plumbing.posthoc.uncertainty import EnsembleUncertainty, UncertaintyEstimate, \
    estimate_uncertainty  # noqa: E402
from clinseq.plumbing.posthoc.calibration import PlattCalibrator, calibrate  # noqa: E402
from clinseq.plumbing.posthoc.interpretation import ImportanceTensor, interpret_global, \
    interpret_instancewise  # noqa: E402
