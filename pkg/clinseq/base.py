# -* encoding: utf-8 *-
import copy
import math
import os
from typing import Dict, Any, List, Optional, Sequence, Union, TYPE_CHECKING

import numpy as np

from clinseq.utils import ContractError, ParameterError, highlight

if TYPE_CHECKING:
    from clinseq.data import Dataset


class DimensionKinds:
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"

    all = [DISCRETE, CONTINUOUS, CATEGORICAL]


class Dimension:
    """
    One searchable hyperparameter. ``domain`` is a list of values for discrete and categorical dimensions and a
    ``[lo, hi]`` interval for continuous ones. ``log`` marks continuous dimensions searched on a log scale.
    ``dimensionality > 1`` makes the value a list of that many components sharing the domain.
    """
    def __init__(self, name: str, kind: str, domain: Sequence[Any], dimensionality: int = 1,
                 log: bool = False) -> None:
        self.name = name
        self.kind = kind
        self.domain = list(domain)
        self.dimensionality = dimensionality
        self.log = log
        self.validate()

    def validate(self) -> None:
        if self.kind not in DimensionKinds.all:
            raise ParameterError("Dimension %s has unknown type %s" % (highlight(self.name), highlight(self.kind)))
        if self.dimensionality < 1:
            raise ParameterError("Dimension %s needs dimensionality >= 1" % highlight(self.name))
        if self.kind == DimensionKinds.CONTINUOUS:
            if len(self.domain) != 2 or not self.domain[0] < self.domain[1]:
                raise ParameterError("Continuous dimension %s needs an interval [lo, hi] with lo < hi" %
                                     highlight(self.name))
            if self.log and self.domain[0] <= 0:
                raise ParameterError("Log-scaled dimension %s needs a positive interval" % highlight(self.name))
        else:
            if not self.domain:
                raise ParameterError("Dimension %s has an empty domain" % highlight(self.name))
            if len(set(map(repr, self.domain))) != len(self.domain):
                raise ParameterError("Dimension %s has duplicate domain values" % highlight(self.name))

    @property
    def midpoint(self) -> Any:
        if self.kind == DimensionKinds.CONTINUOUS:
            lo, hi = self.domain
            return math.sqrt(lo * hi) if self.log else (lo + hi) / 2
        return self.domain[(len(self.domain) - 1) // 2]

    def todict(self) -> Dict[str, Any]:
        ret = {
            "name": self.name,
            "type": self.kind,
            "domain": list(self.domain),
            "dimensionality": self.dimensionality,
        }  # type: Dict[str, Any]
        if self.log:
            ret["log"] = True
        return ret

    @staticmethod
    def fromdict(d: Dict[str, Any]) -> 'Dimension':
        return Dimension(d["name"], d["type"], d["domain"], d.get("dimensionality", 1), d.get("log", False))

    def __repr__(self) -> str:
        return "Dimension<%s %s %s>" % (self.name, self.kind, self.domain)


class HyperparameterSpace:
    def __init__(self, dimensions: Optional[List[Dimension]] = None) -> None:
        self.dimensions = dimensions or []  # type: List[Dimension]
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise ParameterError("Hyperparameter space has duplicate dimension names: %s" % ", ".join(names))

    def __len__(self) -> int:
        return len(self.dimensions)

    def __iter__(self):  # type: ignore
        return iter(self.dimensions)

    def __getitem__(self, name: str) -> Dimension:
        for d in self.dimensions:
            if d.name == name:
                return d
        raise KeyError(name)

    @property
    def names(self) -> List[str]:
        return [d.name for d in self.dimensions]

    def todicts(self) -> List[Dict[str, Any]]:
        return [d.todict() for d in self.dimensions]


class Component:
    """
    The fit/transform contract every pipeline stage implements. Subclasses implement ``_fit`` and
    ``_transform``; the public methods enforce that ``transform`` is never called before ``fit``.

    Components carry their parameters as plain attributes listed in ``param_names`` so that ``new`` and
    ``set_params`` work generically.
    """
    param_names = []  # type: List[str]

    def __init__(self) -> None:
        self.fitted = False
        self.warnings = []  # type: List[str]

    @property
    def name(self) -> str:
        return self.__class__.__name__

    def get_params(self) -> Dict[str, Any]:
        return {k: copy.deepcopy(getattr(self, k)) for k in self.param_names}

    def set_params(self, **params: Any) -> 'Component':
        for k, v in params.items():
            if k not in self.param_names:
                raise ParameterError("%s has no parameter %s" % (self.name, highlight(k)))
            setattr(self, k, v)
        return self

    def new(self, model_id: Optional[str] = None) -> 'Component':
        """
        A fresh, unfitted component with the same parameters.
        """
        params = self.get_params()
        if model_id is not None and "model_id" in self.param_names:
            params["model_id"] = model_id
        return self.__class__(**params)

    def get_hyperparameter_space(self) -> HyperparameterSpace:
        return HyperparameterSpace()

    def check_fitted(self) -> None:
        if not self.fitted:
            raise ContractError("%s used before fit()" % highlight(self.name))

    def _fit(self, dataset: 'Dataset') -> None:
        raise NotImplementedError

    def _transform(self, dataset: 'Dataset') -> 'Dataset':
        raise NotImplementedError

    def fit(self, dataset: 'Dataset') -> 'Component':
        self.warnings = []
        self._fit(dataset)
        self.fitted = True
        return self

    def transform(self, dataset: 'Dataset') -> 'Dataset':
        self.check_fitted()
        return self._transform(dataset)

    def fit_transform(self, dataset: 'Dataset') -> 'Dataset':
        return self.fit(dataset).transform(dataset)

    def __repr__(self) -> str:
        return "%s(%s)" % (self.name, ", ".join("%s=%r" % (k, v) for k, v in self.get_params().items()))


class Predictor(Component):
    """
    Model flavour of the contract: ``fit`` then ``predict``. ``predict_steps`` returns the per-step outputs
    ``[instance][step][label]`` for online and one-shot problems alike; ``predict`` shapes them like the
    dataset's ``LabelTensor``.
    """
    param_names = ["model_id", "model_path"]

    def __init__(self, model_id: str = "model", model_path: str = "tmp") -> None:
        super().__init__()
        self.model_id = model_id
        self.model_path = model_path
        self.task = None  # type: Optional[str]
        self.problem = None  # type: Optional[str]

    def _transform(self, dataset: 'Dataset') -> 'Dataset':
        raise ContractError("%s is a model; use predict() instead of transform()" % highlight(self.name))

    def _predict_steps(self, dataset: 'Dataset') -> np.ndarray:
        raise NotImplementedError

    def predict_steps(self, dataset: 'Dataset') -> np.ndarray:
        self.check_fitted()
        return self._predict_steps(dataset)

    def predict(self, dataset: 'Dataset') -> np.ndarray:
        from clinseq.data import collapse_steps
        return collapse_steps(self.predict_steps(dataset), dataset, self.problem)

    def get_path(self, model_id: Optional[str] = None) -> str:
        return os.path.join(self.model_path, "%s.npz" % (model_id or self.model_id))

    def with_params(self, params: Dict[str, Any], model_id: str) -> 'Predictor':
        ret = self.new(model_id)
        ret.set_params(**params)
        return ret  # type: ignore

    def save(self, path: Optional[str] = None) -> str:
        raise NotImplementedError

    @classmethod
    def load(cls, path: str) -> 'Predictor':
        raise NotImplementedError


ComponentOrList = Union[Component, List[Component]]
