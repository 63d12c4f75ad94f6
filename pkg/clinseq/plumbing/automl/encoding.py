# -* encoding: utf-8 *-
import math
from typing import Dict, Any, List, Sequence, Tuple

import numpy as np

from clinseq.base import HyperparameterSpace, Dimension, DimensionKinds
from clinseq.utils import ParameterError, highlight

Config = Dict[str, Any]


class ConfigEncoding:
    """
    Maps configurations of a ``HyperparameterSpace`` to fixed-length vectors in [0, 1]: continuous dimensions
    min-max scaled (on a log scale where flagged), discrete dimensions by scaled rank, categorical dimensions
    one-hot. Decoding rounds discrete values to the nearest domain element. Dimensions missing from a
    configuration encode at their midpoint.
    """
    def __init__(self, space: HyperparameterSpace) -> None:
        self.space = space
        self.slices = []  # type: List[Tuple[Dimension, int, int]]
        width = 0
        for dim in space:
            per = len(dim.domain) if dim.kind == DimensionKinds.CATEGORICAL else 1
            self.slices.append((dim, width, per))
            width += per * dim.dimensionality
        self.width = width

    @property
    def unit_dims(self) -> int:
        """
        Number of coordinates of the unit cube ``from_unit`` reads: one per dimension component.
        """
        return sum(dim.dimensionality for dim in self.space)

    @staticmethod
    def _encode_value(dim: Dimension, value: Any) -> np.ndarray:
        if dim.kind == DimensionKinds.CONTINUOUS:
            lo, hi = dim.domain
            v = float(value)
            if dim.log:
                x = (math.log(v) - math.log(lo)) / (math.log(hi) - math.log(lo))
            else:
                x = (v - lo) / (hi - lo)
            return np.array([min(max(x, 0.0), 1.0)])
        try:
            rank = dim.domain.index(value)
        except ValueError:
            raise ParameterError("%s is not in the domain of %s" % (highlight(repr(value)), highlight(dim.name)))
        if dim.kind == DimensionKinds.DISCRETE:
            return np.array([rank / (len(dim.domain) - 1) if len(dim.domain) > 1 else 0.0])
        onehot = np.zeros(len(dim.domain))
        onehot[rank] = 1.0
        return onehot

    @staticmethod
    def _decode_value(dim: Dimension, x: np.ndarray) -> Any:
        if dim.kind == DimensionKinds.CONTINUOUS:
            lo, hi = dim.domain
            u = min(max(float(x[0]), 0.0), 1.0)
            if dim.log:
                return float(math.exp(math.log(lo) + u * (math.log(hi) - math.log(lo))))
            return float(lo + u * (hi - lo))
        if dim.kind == DimensionKinds.DISCRETE:
            n = len(dim.domain)
            return dim.domain[int(round(min(max(float(x[0]), 0.0), 1.0) * (n - 1)))]
        return dim.domain[int(np.argmax(x))]

    def encode(self, config: Config) -> np.ndarray:
        out = np.empty(self.width)
        for dim, start, per in self.slices:
            value = config.get(dim.name, None)
            if value is None:
                value = dim.midpoint if dim.dimensionality == 1 else [dim.midpoint] * dim.dimensionality
            values = [value] if dim.dimensionality == 1 else list(value)
            if len(values) != dim.dimensionality:
                raise ParameterError("%s needs %s components" % (highlight(dim.name), dim.dimensionality))
            for c, v in enumerate(values):
                out[start + c * per:start + (c + 1) * per] = self._encode_value(dim, v)
        return out

    def decode(self, vector: np.ndarray) -> Config:
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (self.width,):
            raise ParameterError("Encoded configuration has shape %s, expected (%s,)" % (vector.shape, self.width))
        config = {}  # type: Config
        for dim, start, per in self.slices:
            values = [self._decode_value(dim, vector[start + c * per:start + (c + 1) * per])
                      for c in range(dim.dimensionality)]
            config[dim.name] = values[0] if dim.dimensionality == 1 else values
        return self.prune(config)

    def from_unit(self, u: Sequence[float]) -> Config:
        """
        The configuration at point ``u`` of the unit cube (one coordinate per dimension component); used to map
        space-filling designs onto the space.
        """
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0 - 1e-12)
        config = {}  # type: Config
        i = 0
        for dim in self.space:
            values = []
            for _ in range(dim.dimensionality):
                if dim.kind == DimensionKinds.CONTINUOUS:
                    values.append(self._decode_value(dim, np.array([u[i]])))
                else:
                    values.append(dim.domain[int(u[i] * len(dim.domain))])
                i += 1
            config[dim.name] = values[0] if dim.dimensionality == 1 else values
        return self.prune(config)

    def sample(self, rng: np.random.Generator) -> Config:
        return self.from_unit(rng.random(self.unit_dims))

    def prune(self, config: Config) -> Config:
        """
        Drops dimensions that are inactive under ``config``; all are active in a plain space.
        """
        return config

    def key(self, config: Config) -> str:
        return repr(sorted(config.items()))


class PipelineSpace(ConfigEncoding):
    """
    The joint space of a pipeline search: one categorical dimension per stage choosing a menu entry, plus the
    hyperparameters of every entry named ``<stage>.<index>.<param>``. Only the chosen entries' hyperparameters
    are active; inactive ones encode at their midpoints.
    """
    def __init__(self, menus: Sequence[Tuple[str, Sequence[Any]]]) -> None:
        self.stages = []  # type: List[Tuple[str, int]]
        dims = []  # type: List[Dimension]
        for stage, menu in menus:
            if not menu:
                raise ParameterError("The %s menu is empty" % highlight(stage))
            self.stages.append((stage, len(menu)))
            dims.append(Dimension(stage, DimensionKinds.CATEGORICAL, list(range(len(menu)))))
            for i, entry in enumerate(menu):
                for dim in entry.get_hyperparameter_space():
                    dims.append(Dimension("%s.%d.%s" % (stage, i, dim.name), dim.kind, dim.domain,
                                          dim.dimensionality, dim.log))
        super().__init__(HyperparameterSpace(dims))

    def prune(self, config: Config) -> Config:
        chosen = {stage: config.get(stage) for stage, _ in self.stages}
        ret = {}  # type: Config
        for name, value in config.items():
            if name in chosen:
                ret[name] = value
                continue
            stage, index, _ = name.split(".", 2)
            if chosen.get(stage) == int(index):
                ret[name] = value
        return ret

    @staticmethod
    def params_of(config: Config, stage: str) -> Dict[str, Any]:
        """
        The hyperparameters ``config`` sets for the entry chosen at ``stage``.
        """
        prefix = "%s.%s." % (stage, config[stage])
        return {k[len(prefix):]: v for k, v in config.items() if k.startswith(prefix)}
