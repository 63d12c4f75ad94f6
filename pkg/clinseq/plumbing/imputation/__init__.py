# -* encoding: utf-8 *-
from typing import Dict, List, Optional, Any, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline
from sklearn.linear_model import Ridge
from sklearn.metrics.pairwise import nan_euclidean_distances

from clinseq.base import Component, HyperparameterSpace, Dimension, DimensionKinds
from clinseq.data import Dataset
from clinseq.utils import ParameterError, print_warning, print_debug, highlight, not_builtin


class DataType:
    STATIC = "static"
    TEMPORAL = "temporal"

    all = [STATIC, TEMPORAL]


STATIC_METHODS = ["mean", "median", "knn", "mice-lite"]
TEMPORAL_METHODS = ["mean", "median", "locf", "linear", "cubic-spline"]

_aliases = {
    DataType.STATIC: {"mice": "mice-lite"},
    DataType.TEMPORAL: {"cubic": "cubic-spline", "quadratic": "cubic-spline", "spline": "cubic-spline"},
}
_external = ["gain", "mrnn", "tgain", "missforest"]


def resolve_method(method: str, data_type: str) -> str:
    builtin = STATIC_METHODS if data_type == DataType.STATIC else TEMPORAL_METHODS
    name = str(method).lower()
    name = _aliases[data_type].get(name, name)
    if name in builtin:
        return name
    if name in _external:
        raise not_builtin("The %s imputer" % data_type, name, builtin)
    raise ParameterError("Unknown %s imputation method %s (expected one of %s)" %
                         (data_type, highlight(str(method)), ", ".join(builtin)))


def _feature_stats(observed: List[np.ndarray], name: List[str], owner: Component,
                   categorical: Optional[List[bool]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-feature means and medians of the observed train cells. Categorical features get their most frequent
    code for both. A feature without observations falls back to 0 and leaves a warning on ``owner``.
    """
    means = np.zeros(len(observed))
    medians = np.zeros(len(observed))
    for j, cells in enumerate(observed):
        if not len(cells):
            msg = "Feature %s is never observed in the training data; imputing 0" % highlight(name[j])
            print_warning(msg)
            owner.warnings.append(msg)
            continue
        if categorical and categorical[j]:
            codes, counts = np.unique(cells, return_counts=True)
            means[j] = medians[j] = codes[np.argmax(counts)]
        else:
            means[j] = cells.mean()
            medians[j] = np.median(cells)
    return means, medians


class StaticImputer(Component):
    """
    Fills missing static cells. ``knn`` averages the ``k`` nearest train instances under the masked Euclidean
    distance (features missing on either side are skipped and the distance rescaled), ``mice-lite`` replays
    ``rounds`` rounds of per-feature ridge regressions, starting from the medians.
    """
    param_names = ["method", "k", "rounds", "ridge"]

    def __init__(self, method: str = "median", k: int = 5, rounds: int = 3, ridge: float = 1e-3) -> None:
        super().__init__()
        self.method = resolve_method(method, DataType.STATIC)
        if int(k) < 1:
            raise ParameterError("knn imputation needs k >= 1, not %s" % highlight(str(k)))
        if int(rounds) < 1:
            raise ParameterError("mice-lite needs at least one round")
        self.k = int(k)
        self.rounds = int(rounds)
        self.ridge = ridge
        self.means = np.zeros(0)
        self.medians = np.zeros(0)
        self.categorical = []  # type: List[bool]
        self.train = np.zeros((0, 0))
        self.regressions = []  # type: List[List[Optional[Tuple[np.ndarray, float]]]]

    def get_hyperparameter_space(self) -> HyperparameterSpace:
        if self.method == "knn":
            return HyperparameterSpace([Dimension("k", DimensionKinds.DISCRETE, [1, 3, 5, 10])])
        if self.method == "mice-lite":
            return HyperparameterSpace([Dimension("rounds", DimensionKinds.DISCRETE, [1, 2, 3, 5])])
        return HyperparameterSpace()

    def _fit(self, dataset: Dataset) -> None:
        rows = dataset.fit_rows()
        values = dataset.static.values[rows]
        mask = dataset.static.observed_mask[rows] == 1
        self.categorical = [n in dataset.static_categories for n in dataset.static_names]
        self.means, self.medians = _feature_stats([values[mask[:, j], j] for j in range(values.shape[1])],
                                                  dataset.static_names, self, self.categorical)
        self.train = np.where(mask, values, np.nan)
        self.regressions = []
        if self.method == "mice-lite":
            self._fit_rounds(values, mask)

    def _fit_rounds(self, values: np.ndarray, mask: np.ndarray) -> None:
        filled = np.where(mask, values, self.medians[None, :])
        d = values.shape[1]
        for _ in range(self.rounds):
            models = []  # type: List[Optional[Tuple[np.ndarray, float]]]
            for j in range(d):
                obs = mask[:, j]
                if self.categorical[j] or obs.sum() < 2 or d < 2:
                    models.append(None)
                    continue
                others = np.delete(filled, j, axis=1)
                reg = Ridge(alpha=self.ridge).fit(others[obs], values[obs, j])
                models.append((reg.coef_.copy(), float(reg.intercept_)))
                if (~obs).any():
                    filled[~obs, j] = reg.predict(others[~obs])
            self.regressions.append(models)

    def _transform(self, dataset: Dataset) -> Dataset:
        static = dataset.static.copy()
        if static.values.shape[1] != len(self.medians):
            raise ParameterError("Static imputer was fitted on %s features, dataset has %s" %
                                 (len(self.medians), static.values.shape[1]))
        missing = static.observed_mask == 0
        if not missing.any():
            return dataset

        if self.method == "mean":
            fill = np.broadcast_to(self.means, static.values.shape)
        elif self.method == "median":
            fill = np.broadcast_to(self.medians, static.values.shape)
        elif self.method == "knn":
            fill = self._knn(static.values, missing)
        else:
            fill = self._mice(static.values, missing)

        static.values[missing] = fill[missing]
        static.observed_mask[:] = 1
        return dataset.replace(static=static)

    def _knn(self, values: np.ndarray, missing: np.ndarray) -> np.ndarray:
        fill = np.broadcast_to(self.medians, values.shape).copy()
        todo = np.flatnonzero(missing.any(axis=1))
        if not len(todo) or not len(self.train):
            return fill
        query = np.where(missing[todo], np.nan, values[todo])
        distances = nan_euclidean_distances(query, self.train)
        for r, i in enumerate(todo):
            order = np.argsort(distances[r], kind="stable")
            for j in np.flatnonzero(missing[i]):
                donors = [o for o in order if np.isfinite(distances[r, o]) and not np.isnan(self.train[o, j])]
                donors = donors[:self.k]
                if not donors:
                    continue
                cells = self.train[donors, j]
                if self.categorical[j]:
                    codes, counts = np.unique(cells, return_counts=True)
                    fill[i, j] = codes[np.argmax(counts)]
                else:
                    fill[i, j] = cells.mean()
        return fill

    def _mice(self, values: np.ndarray, missing: np.ndarray) -> np.ndarray:
        filled = np.where(missing, self.medians[None, :], values)
        for models in self.regressions:
            for j, model in enumerate(models):
                if model is None or not missing[:, j].any():
                    continue
                coef, intercept = model
                others = np.delete(filled, j, axis=1)
                filled[missing[:, j], j] = others[missing[:, j]] @ coef + intercept
        return filled


class TemporalImputer(Component):
    """
    Fills missing temporal cells within the valid steps; padding stays unobserved. ``locf`` carries the last
    observation forward, then the first one backward. ``linear`` and ``cubic-spline`` (natural boundary)
    interpolate each instance's series against its time axis and clamp beyond the observed range. Series with
    too few observations (none for ``locf``, fewer than 2 for ``linear``, 4 for ``cubic-spline``) get the train
    median.
    """
    param_names = ["method"]

    def __init__(self, method: str = "median") -> None:
        super().__init__()
        self.method = resolve_method(method, DataType.TEMPORAL)
        self.means = np.zeros(0)
        self.medians = np.zeros(0)

    def _fit(self, dataset: Dataset) -> None:
        rows = dataset.fit_rows()
        values = dataset.temporal.values[rows]
        cells = (dataset.temporal.observed_mask[rows] == 1) & dataset.temporal.valid_steps()[rows][:, :, None]
        self.means, self.medians = _feature_stats([values[:, :, d][cells[:, :, d]] for d in range(values.shape[2])],
                                                  dataset.temporal_names, self)

    def _transform(self, dataset: Dataset) -> Dataset:
        temporal = dataset.temporal.copy()
        if temporal.values.shape[2] != len(self.medians):
            raise ParameterError("Temporal imputer was fitted on %s features, dataset has %s" %
                                 (len(self.medians), temporal.values.shape[2]))
        valid = temporal.valid_steps()[:, :, None]
        observed = temporal.observed_mask == 1
        missing = ~observed & valid
        if not missing.any():
            return dataset

        if self.method == "mean":
            fill = np.broadcast_to(self.means, temporal.values.shape)
        elif self.method == "median":
            fill = np.broadcast_to(self.medians, temporal.values.shape)
        elif self.method == "locf":
            fill = self._locf(temporal.values, observed, valid)
        else:
            fill = self._interpolate(temporal.values, temporal.time, observed, missing)

        temporal.values[missing] = fill[missing]
        temporal.observed_mask[missing] = 1
        print_debug("Imputed %s temporal cells with %s" % (missing.sum(), highlight(self.method)))
        return dataset.replace(temporal=temporal)

    def _locf(self, values: np.ndarray, observed: np.ndarray, valid: np.ndarray) -> np.ndarray:
        n, t, d = values.shape
        steps = np.arange(t)[None, :, None]
        last = np.maximum.accumulate(np.where(observed, steps, -1), axis=1)
        nxt = np.flip(np.minimum.accumulate(np.flip(np.where(observed, steps, t), axis=1), axis=1), axis=1)
        source = np.where(last >= 0, last, nxt)
        rows = np.arange(n)[:, None, None]
        cols = np.arange(d)[None, None, :]
        has = source < t
        gathered = values[rows, np.clip(source, 0, max(t - 1, 0)), cols]
        return np.where(has & valid, gathered, self.medians[None, None, :])

    def _interpolate(self, values: np.ndarray, time: np.ndarray, observed: np.ndarray,
                     missing: np.ndarray) -> np.ndarray:
        fill = np.broadcast_to(self.medians, values.shape).copy()
        needed = 2 if self.method == "linear" else 4
        for i, d in zip(*np.nonzero(missing.any(axis=1))):
            obs = observed[i, :, d]
            if obs.sum() < needed:
                continue
            t_obs, v_obs = time[i, obs], values[i, obs, d]
            t_miss = time[i, missing[i, :, d]]
            if self.method == "linear":
                est = np.interp(t_miss, t_obs, v_obs)
            else:
                spline = CubicSpline(t_obs, v_obs, bc_type="natural")
                est = spline(np.clip(t_miss, t_obs[0], t_obs[-1]))
                est = np.where(t_miss < t_obs[0], v_obs[0], np.where(t_miss > t_obs[-1], v_obs[-1], est))
            fill[i, missing[i, :, d], d] = est
        return fill


def Imputation(imputation_model_name: str, data_type: str, **params: Any) -> Union[StaticImputer, TemporalImputer]:
    """
    Builds the imputer for ``data_type`` (``static`` or ``temporal``).
    """
    if data_type == DataType.STATIC:
        return StaticImputer(imputation_model_name, **params)
    elif data_type == DataType.TEMPORAL:
        return TemporalImputer(imputation_model_name, **params)
    raise ParameterError("Unknown data type %s (expected static or temporal)" % highlight(str(data_type)))


def impute_static(dataset: Dataset, method: str, **params: Any) -> Dataset:
    return StaticImputer(method, **params).fit_transform(dataset)


def impute_temporal(dataset: Dataset, method: str) -> Dataset:
    return TemporalImputer(method).fit_transform(dataset)
