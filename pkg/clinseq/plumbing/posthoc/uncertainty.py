# -* encoding: utf-8 *-
from typing import Dict, Any, List, Optional, Callable, Union

import numpy as np
from joblib import Parallel, delayed
from scipy.stats import norm

from clinseq import persist
from clinseq.base import Predictor
from clinseq.data import Dataset
from clinseq.primitives import Fold, Task
from clinseq.utils import ParameterError, DataError, highlight, print_debug

ModelFactory = Union[Predictor, Callable[[int, str], Predictor]]


class UncertaintyEstimate:
    """
    Per-prediction ensemble statistics, each shaped like ``Predictor.predict``'s output. ``lower``/``upper`` are
    ``mean -+ half_width``, clipped to [0, 1] for classification.
    """
    def __init__(self, mean: np.ndarray, std: np.ndarray, half_width: np.ndarray, lower: np.ndarray,
                 upper: np.ndarray, level: float) -> None:
        self.mean = mean
        self.std = std
        self.half_width = half_width
        self.lower = lower
        self.upper = upper
        self.level = level


def _fit_member(member: Predictor, dataset: Dataset) -> Predictor:
    member.fit(dataset)
    return member


class EnsembleUncertainty(Predictor):
    """
    ``K`` independently trained copies of a model. Member ``k`` gets seed ``seed + k`` (unless ``reseed`` is off)
    and, with ``bootstrap``, a resample with replacement of the train instances; the validation and test
    instances are kept as they are. ``template`` is an unfitted model or a callable ``(seed, model_id)``.
    """
    param_names = ["template", "K", "bootstrap", "reseed", "level", "seed", "n_jobs", "model_id", "model_path"]

    def __init__(self, template: ModelFactory, K: int = 5, bootstrap: bool = True, reseed: bool = True,
                 level: float = 0.95, seed: int = 0, n_jobs: int = 1, model_id: str = "ensemble",
                 model_path: str = "tmp") -> None:
        super().__init__(model_id, model_path)
        if int(K) < 2:
            raise ParameterError("An ensemble needs K >= 2 members, not %s" % highlight(str(K)))
        if not 0 < level < 1:
            raise ParameterError("The confidence level must be in (0, 1), not %s" % highlight(str(level)))
        self.template = template
        self.K = int(K)
        self.bootstrap = bool(bootstrap)
        self.reseed = bool(reseed)
        self.level = float(level)
        self.seed = int(seed)
        self.n_jobs = int(n_jobs)
        self.members = []  # type: List[Predictor]

    @property
    def z(self) -> float:
        return float(norm.ppf(0.5 + self.level / 2))

    def make_member(self, k: int) -> Predictor:
        model_id = "%s-%d" % (self.model_id, k)
        seed = self.seed + k if self.reseed else self.seed
        if isinstance(self.template, Predictor):
            member = self.template.new(model_id)
            if "seed" in member.param_names:
                member.set_params(seed=seed)
            return member  # type: ignore
        return self.template(seed, model_id)

    def member_dataset(self, dataset: Dataset, k: int) -> Dataset:
        if not self.bootstrap:
            return dataset
        train = dataset.fit_rows()
        rng = np.random.default_rng([self.seed, k])
        resampled = rng.choice(train, size=len(train), replace=True)
        if (dataset.fold == Fold.UNASSIGNED).all():
            return dataset.subset(resampled)
        rest = np.flatnonzero(dataset.fold != Fold.TRAIN)
        return dataset.subset(np.concatenate([resampled, rest]))

    def _fit(self, dataset: Dataset) -> None:
        spec = dataset.require_problem()
        if not len(dataset.fit_rows()):
            raise DataError("Can't fit %s: the train fold is empty" % highlight(self.model_id))
        self.task, self.problem = spec.task, spec.problem
        members = [self.make_member(k) for k in range(self.K)]
        self.members = Parallel(n_jobs=self.n_jobs, prefer="threads")(
            delayed(_fit_member)(member, self.member_dataset(dataset, k)) for k, member in enumerate(members)
        )
        print_debug("Fitted %s members of %s" % (self.K, highlight(self.model_id)))

    def member_predictions(self, dataset: Dataset) -> np.ndarray:
        """
        ``[member][...]`` predictions, sorted along the member axis so that summaries don't depend on member
        order.
        """
        self.check_fitted()
        return np.sort(np.stack([m.predict(dataset) for m in self.members]), axis=0)

    def _predict_steps(self, dataset: Dataset) -> np.ndarray:
        return np.sort(np.stack([m.predict_steps(dataset) for m in self.members]), axis=0).mean(axis=0)

    def estimate(self, dataset: Dataset) -> UncertaintyEstimate:
        preds = self.member_predictions(dataset)
        mean = preds.mean(axis=0)
        std = preds.std(axis=0)
        half = self.z * std
        lower, upper = mean - half, mean + half
        if self.task == Task.CLASSIFICATION:
            lower, upper = np.clip(lower, 0.0, 1.0), np.clip(upper, 0.0, 1.0)
        return UncertaintyEstimate(mean, std, half, lower, upper, self.level)

    def save(self, path: Optional[str] = None) -> str:
        self.check_fitted()
        paths = [m.save() for m in self.members]
        params = {k: v for k, v in self.get_params().items() if k != "template"}
        header = {
            "class": persist.class_path(self),
            "params": params,
            "members": paths,
            "task": self.task,
            "problem": self.problem,
        }  # type: Dict[str, Any]
        return persist.write_arrays(path or self.get_path(), header, {})

    @classmethod
    def from_state(cls, header: Dict[str, Any], arrays: Dict[str, np.ndarray], path: str) -> 'EnsembleUncertainty':
        members = [persist.load_model(p) for p in header["members"]]
        model = cls(members[0], **header["params"])
        model.members = members
        model.task, model.problem = header["task"], header["problem"]
        model.fitted = True
        return model


def estimate_uncertainty(factory: ModelFactory, dataset: Dataset, K: int = 5, level: float = 0.95,
                         bootstrap: bool = True, seed: int = 0, n_jobs: int = 1,
                         evaluate_on: Optional[Dataset] = None) -> tuple:
    """
    Fits an ensemble on ``dataset`` and returns it with its estimate on ``evaluate_on`` (default: the dataset).
    """
    ensemble = EnsembleUncertainty(factory, K=K, bootstrap=bootstrap, level=level, seed=seed, n_jobs=n_jobs)
    ensemble.fit(dataset)
    return ensemble, ensemble.estimate(evaluate_on if evaluate_on is not None else dataset)
