# -* encoding: utf-8 *-
from typing import List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from clinseq.base import Component, Predictor
from clinseq.data import Dataset, label_steps
from clinseq.primitives import Fold, MetricName, Direction, Mode
from clinseq.plumbing.posthoc.metrics import masked_score
from clinseq.plumbing.predictors import SequenceModel
from clinseq.plumbing.predictors.network import LINEAR
from clinseq.utils import ParameterError, DataError, highlight, print_info, print_debug


class FeatureType:
    STATIC = "static"
    TEMPORAL = "temporal"

    all = [STATIC, TEMPORAL]


GREEDY_ADDITION = "greedy-addition"
GREEDY_DELETION = "greedy-deletion"
RECURSIVE_ADDITION = "recursive-addition"
RECURSIVE_DELETION = "recursive-deletion"
NONE = "none"
METHODS = [GREEDY_ADDITION, GREEDY_DELETION, RECURSIVE_ADDITION, RECURSIVE_DELETION, NONE]

_aliases = {"greedy-addtion": GREEDY_ADDITION}


def default_proxy(feature_type: str) -> SequenceModel:
    """
    A cheap linear model with a fixed seed. Proxies for temporal selection ignore the static features.
    """
    return SequenceModel(
        model_type=LINEAR, epoch=5, learning_rate=1e-2, batch_size=128, seed=0, model_id="selection-proxy",
        static_mode=Mode.CONCATENATE if feature_type == FeatureType.STATIC else Mode.NONE, time_mode=Mode.NONE,
    )


def restrict(dataset: Dataset, feature_type: str, indices: Sequence[int]) -> Dataset:
    idx = sorted(indices)
    if feature_type == FeatureType.TEMPORAL:
        return dataset.replace(temporal=dataset.temporal.columns(idx),
                               temporal_names=[dataset.temporal_names[i] for i in idx])
    names = [dataset.static_names[i] for i in idx]
    return dataset.replace(static=dataset.static.columns(idx), static_names=names,
                           static_categories={k: v for k, v in dataset.static_categories.items() if k in names})


class FeatureSelection(Component):
    """
    Wrapper feature selection with a proxy model scored on the validation fold.

    The greedy methods score every feature in one pass: ``greedy-addition`` trains the proxy on each single
    feature and keeps the ``feature_number`` best; ``greedy-deletion`` trains it on all features but one and keeps
    the ``feature_number`` features whose removal hurts most. The recursive methods refit every round:
    ``recursive-addition`` adds the best marginal feature until ``feature_number`` are selected,
    ``recursive-deletion`` removes the least harmful one until ``feature_number`` remain. Ties go to the lower
    feature index. The selection keeps the dataset's feature order.
    """
    param_names = ["method", "feature_type", "feature_number", "metric", "n_jobs"]

    def __init__(self, method: str = NONE, feature_type: str = FeatureType.TEMPORAL,
                 feature_number: Optional[int] = None, metric: Optional[str] = None,
                 proxy: Optional[Predictor] = None, n_jobs: int = 1) -> None:
        super().__init__()
        name = _aliases.get(str(method).lower(), str(method).lower())
        if name not in METHODS:
            raise ParameterError("Unknown feature selection method %s (expected one of %s)" %
                                 (highlight(str(method)), ", ".join(METHODS)))
        if feature_type not in FeatureType.all:
            raise ParameterError("feature_type must be static or temporal, not %s" % highlight(str(feature_type)))
        if metric is not None:
            MetricName.direction(metric)
        self.method = name
        self.feature_type = feature_type
        self.feature_number = feature_number
        self.metric = metric
        self.proxy = proxy
        self.n_jobs = int(n_jobs)
        self.selected_names = []  # type: List[str]
        self.selected = []  # type: List[int]
        self.scores = np.zeros(0)

    def new(self, model_id: Optional[str] = None) -> 'FeatureSelection':
        return FeatureSelection(proxy=self.proxy, **self.get_params())

    def _names(self, dataset: Dataset) -> List[str]:
        return dataset.temporal_names if self.feature_type == FeatureType.TEMPORAL else dataset.static_names

    def _fit(self, dataset: Dataset) -> None:
        names = self._names(dataset)
        d = len(names)
        if self.method == NONE:
            self.selected = list(range(d))
            self.selected_names = list(names)
            self.scores = np.full(d, np.nan)
            return
        if self.feature_number is None or not 1 <= int(self.feature_number) <= d:
            raise ParameterError("feature_number must be between 1 and %s, not %s" %
                                 (d, highlight(str(self.feature_number))))
        spec = dataset.require_problem()
        if not len(dataset.fold_indices(Fold.TRAIN)) or not len(dataset.fold_indices(Fold.VAL)):
            raise DataError("Feature selection needs assigned train and validation folds")
        self.metric = self.metric or spec.metric
        k = int(self.feature_number)

        if self.method == GREEDY_ADDITION:
            self.scores = self._evaluate(dataset, [[j] for j in range(d)])
            order = np.argsort(-self._key(self.scores), kind="stable")
            self.selected = sorted(int(j) for j in order[:k])
        elif self.method == GREEDY_DELETION:
            self.scores = self._evaluate(dataset, [[i for i in range(d) if i != j] for j in range(d)])
            order = np.argsort(self._key(self.scores), kind="stable")
            self.selected = sorted(int(j) for j in order[:k])
        elif self.method == RECURSIVE_ADDITION:
            self.scores = np.full(d, np.nan)
            chosen = []  # type: List[int]
            while len(chosen) < k:
                candidates = [j for j in range(d) if j not in chosen]
                values = self._evaluate(dataset, [sorted(chosen + [j]) for j in candidates])
                best = self._best(values)
                chosen.append(candidates[best])
                self.scores[candidates[best]] = values[best]
            self.selected = sorted(chosen)
        else:
            self.scores = np.full(d, np.nan)
            remaining = list(range(d))
            while len(remaining) > k:
                values = self._evaluate(dataset, [[i for i in remaining if i != j] for j in remaining])
                worst = self._best(values)
                self.scores[remaining[worst]] = values[worst]
                del remaining[worst]
            self.selected = remaining
        self.selected_names = [names[j] for j in self.selected]
        print_info("Selected %s features: %s" % (self.feature_type, ", ".join(highlight(n) for n in
                                                                             self.selected_names)))

    def _key(self, values: np.ndarray) -> np.ndarray:
        """
        Higher-is-better view of proxy scores; undefined scores rank last.
        """
        key = Direction.sign(MetricName.direction(self.metric)) * values  # type: ignore
        return np.where(np.isnan(key), -np.inf, key)

    def _best(self, values: np.ndarray) -> int:
        key = self._key(values)
        return int(np.argmax(key))  # first maximum, so ties go to the lower index

    def _evaluate(self, dataset: Dataset, subsets: List[List[int]]) -> np.ndarray:
        proxy = self.proxy if self.proxy is not None else default_proxy(self.feature_type)
        val = dataset.fold_indices(Fold.VAL)
        Y, M = label_steps(dataset)
        Y = np.nan_to_num(Y)

        def run(subset: List[int]) -> float:
            candidate = restrict(dataset, self.feature_type, subset)
            model = proxy.new("%s-%s" % (proxy.model_id, "-".join(map(str, subset))))  # type: ignore
            model.fit(candidate)
            P = model.predict_steps(candidate.subset(val))  # type: ignore
            value = masked_score(self.metric, Y[val], M[val], P)  # type: ignore
            return np.nan if value is None else value

        values = Parallel(n_jobs=self.n_jobs, prefer="threads")(delayed(run)(s) for s in subsets)
        print_debug("Evaluated %s candidate feature sets" % len(subsets))
        return np.asarray(values, dtype=float)

    def _transform(self, dataset: Dataset) -> Dataset:
        if self.method == NONE:
            return dataset
        names = self._names(dataset)
        missing = [n for n in self.selected_names if n not in names]
        if missing:
            raise ParameterError("Dataset lacks the selected %s features %s" % (self.feature_type, ", ".join(missing)))
        return restrict(dataset, self.feature_type, [names.index(n) for n in self.selected_names])


def select_features(dataset: Dataset, method: str, feature_number: Optional[int] = None,
                    proxy: Optional[Predictor] = None, metric: Optional[str] = None,
                    feature_type: str = FeatureType.TEMPORAL, n_jobs: int = 1) -> Dataset:
    return FeatureSelection(method, feature_type, feature_number, metric, proxy, n_jobs).fit_transform(dataset)
