# -* encoding: utf-8 *-
import json
from typing import Dict, Any, List, Optional, Union

import numpy as np
import pandas as pd

from clinseq import persist
from clinseq.base import Predictor
from clinseq.data import Dataset, label_steps
from clinseq.primitives import Fold, MetricName, Direction, ProblemKind
from clinseq.plumbing.posthoc.metrics import masked_score, stepwise_scores
from clinseq.utils import ParameterError, DataError, highlight


class BOMetricSpec:
    """
    What the optimisers score candidates with: a metric, its direction and the fold it is computed on.
    """
    def __init__(self, metric: str, direction: Optional[str] = None, split: Union[int, str] = Fold.VAL) -> None:
        expected = MetricName.direction(metric)
        if direction is not None and direction != expected:
            raise ParameterError("%s is to be %sd, not %sd" % (highlight(metric), expected, direction))
        self.metric = metric
        self.direction = expected
        self.split = Fold.parse(split)

    @property
    def sign(self) -> float:
        return Direction.sign(self.direction)

    @staticmethod
    def of(metric: Union[str, 'BOMetricSpec']) -> 'BOMetricSpec':
        return metric if isinstance(metric, BOMetricSpec) else BOMetricSpec(metric)

    def rows(self, dataset: Dataset) -> np.ndarray:
        rows = dataset.fold_indices(self.split)
        if not len(rows):
            raise DataError("Candidates are scored on the %s fold, which is empty" % Fold.names[self.split])
        return rows

    def step_scores(self, model: Predictor, dataset: Dataset) -> np.ndarray:
        """
        Per-step scores of ``model`` on the scoring fold; one entry for one-shot problems. Steps where the
        metric is undefined are NaN.
        """
        view = dataset.subset(self.rows(dataset))
        Y, M = label_steps(view)
        Y = np.nan_to_num(Y)
        P = model.predict_steps(view)
        if view.require_problem().problem == ProblemKind.ONE_SHOT:
            value = masked_score(self.metric, Y, M, P)
            return np.array([np.nan if value is None else value])
        return stepwise_scores(self.metric, Y, M, P)

    def better(self, a: float, b: float) -> bool:
        if np.isnan(a):
            return False
        return bool(np.isnan(b) or self.sign * (a - b) > 0)

    def __repr__(self) -> str:
        return "BOMetricSpec<%s %s on %s>" % (self.metric, self.direction, Fold.names[self.split])


def aggregate(scores: np.ndarray) -> float:
    finite = scores[np.isfinite(scores)]
    return float(finite.mean()) if len(finite) else np.nan


class TraceEntry:
    def __init__(self, iteration: int, config: Dict[str, Any], encoded: np.ndarray, model_path: Optional[str],
                 step_scores: np.ndarray, seconds: float, label: str = "") -> None:
        self.iteration = iteration
        self.config = config
        self.encoded = np.asarray(encoded, dtype=float)
        self.model_path = model_path
        self.step_scores = np.asarray(step_scores, dtype=float)
        self.seconds = seconds
        self.label = label

    @property
    def step_mask(self) -> np.ndarray:
        return np.isfinite(self.step_scores)

    @property
    def score(self) -> float:
        """
        Mean score over the steps where it is defined.
        """
        return aggregate(self.step_scores)

    def model(self) -> Predictor:
        if self.model_path is None:
            raise DataError("Trace entry %s has no persisted model" % self.iteration)
        return persist.cached_model(self.model_path)


class OptimizationTrace:
    """
    Append-only record of an optimisation run. Incumbents follow the metric's direction; ties keep the earlier
    entry.
    """
    def __init__(self, metric: BOMetricSpec) -> None:
        self.metric = metric
        self.entries = []  # type: List[TraceEntry]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):  # type: ignore
        return iter(self.entries)

    def append(self, entry: TraceEntry) -> None:
        self.entries.append(entry)

    def extend(self, other: 'OptimizationTrace') -> 'OptimizationTrace':
        """
        A new trace with ``other``'s entries renumbered after this one's.
        """
        ret = OptimizationTrace(self.metric)
        for e in self.entries:
            ret.append(e)
        for e in other.entries:
            ret.append(TraceEntry(len(ret), e.config, e.encoded, e.model_path, e.step_scores, e.seconds, e.label))
        return ret

    @property
    def incumbent_index(self) -> int:
        if not self.entries:
            raise ParameterError("An empty trace has no incumbent")
        best = 0
        for i, e in enumerate(self.entries):
            if self.metric.better(e.score, self.entries[best].score):
                best = i
        return best

    @property
    def incumbent(self) -> TraceEntry:
        return self.entries[self.incumbent_index]

    def best_model(self) -> Predictor:
        return self.incumbent.model()

    def score_matrix(self) -> np.ndarray:
        """
        ``[entry][step]`` scores, NaN-padded to the longest score vector.
        """
        width = max((len(e.step_scores) for e in self.entries), default=0)
        out = np.full((len(self.entries), width), np.nan)
        for i, e in enumerate(self.entries):
            out[i, :len(e.step_scores)] = e.step_scores
        return out

    def aggregate_incumbents(self) -> np.ndarray:
        out = np.full(len(self.entries), np.nan)
        best = np.nan
        for i, e in enumerate(self.entries):
            if self.metric.better(e.score, best):
                best = e.score
            out[i] = best
        return out

    def step_incumbents(self) -> np.ndarray:
        """
        Running best score per step ``[entry][step]``, NaN until a step has a defined score.
        """
        scores = self.score_matrix()
        out = np.full(scores.shape, np.nan)
        best = np.full(scores.shape[1], np.nan)
        for i in range(len(scores)):
            for s in range(scores.shape[1]):
                if self.metric.better(scores[i, s], best[s]):
                    best[s] = scores[i, s]
            out[i] = best
        return out

    def to_frame(self) -> pd.DataFrame:
        """
        Long format ``iteration,config...,step,score`` with one column per configuration key.
        """
        keys = sorted(set(k for e in self.entries for k in e.config))
        rows = []
        for e in self.entries:
            config = {k: json.dumps(e.config[k]) if isinstance(e.config.get(k), list) else e.config.get(k)
                      for k in keys}
            for s, value in enumerate(e.step_scores):
                row = {"iteration": e.iteration}  # type: Dict[str, Any]
                row.update(config)
                row["step"] = s
                row["score"] = value
                rows.append(row)
        return pd.DataFrame(rows, columns=["iteration"] + keys + ["step", "score"])

    def to_csv(self, path: str) -> str:
        self.to_frame().to_csv(path, index=False)
        return path
