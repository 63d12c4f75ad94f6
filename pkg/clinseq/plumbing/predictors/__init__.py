# -* encoding: utf-8 *-
from typing import Dict, Any, List, Optional, Union

import numpy as np

from clinseq import persist
from clinseq.base import Predictor, HyperparameterSpace, Dimension, DimensionKinds
from clinseq.data import Dataset, label_steps
from clinseq.primitives import Fold, Mode
from clinseq.plumbing.posthoc.metrics import masked_score, better
from clinseq.plumbing.predictors import network
from clinseq.plumbing.predictors.network import LINEAR, RNN, GRU
from clinseq.utils import ParameterError, ContractError, DataError, highlight, print_debug, progress, not_builtin

MODEL_TYPES = [LINEAR, RNN, GRU]
_external = ["lstm", "attention", "tcn", "transformer"]


def check_model_type(model_type: str) -> str:
    name = str(model_type).lower()
    if name in MODEL_TYPES:
        return name
    if name in _external:
        raise not_builtin("The model class", name, MODEL_TYPES)
    raise ParameterError("Unknown model class %s (expected one of %s)" %
                         (highlight(str(model_type)), ", ".join(MODEL_TYPES)))


class InputLayout:
    """
    How a dataset becomes the model input ``[instance][step][channel]``: the temporal features (all, or the
    ``input_features`` subset), then the static features repeated over steps if ``static_mode`` is
    ``concatenate``, then the time since the previous step if ``time_mode`` is ``concatenate``.
    """
    def __init__(self, temporal_names: List[str], static_names: List[str], static_mode: str, time_mode: str,
                 restricted: bool = False) -> None:
        self.temporal_names = list(temporal_names)
        self.static_names = list(static_names)
        self.static_mode = Mode.parse(static_mode)
        self.time_mode = Mode.parse(time_mode)
        self.restricted = restricted

    @staticmethod
    def for_dataset(dataset: Dataset, static_mode: str, time_mode: str,
                    input_features: Optional[List[str]] = None) -> 'InputLayout':
        if input_features:
            unknown = [f for f in input_features if f not in dataset.temporal_names]
            if unknown:
                raise ParameterError("input_features %s are not temporal features of the dataset" %
                                     ", ".join(unknown))
            return InputLayout(input_features, dataset.static_names, static_mode, time_mode, restricted=True)
        return InputLayout(dataset.temporal_names, dataset.static_names, static_mode, time_mode)

    @property
    def input_dim(self) -> int:
        return len(self.temporal_names) + \
            (len(self.static_names) if self.static_mode == Mode.CONCATENATE else 0) + \
            (1 if self.time_mode == Mode.CONCATENATE else 0)

    @property
    def channel_names(self) -> List[str]:
        names = list(self.temporal_names)
        if self.static_mode == Mode.CONCATENATE:
            names += self.static_names
        if self.time_mode == Mode.CONCATENATE:
            names.append("delta_t")
        return names

    def _temporal_columns(self, dataset: Dataset) -> List[int]:
        if self.restricted:
            missing = [f for f in self.temporal_names if f not in dataset.temporal_names]
            if missing:
                raise ContractError("Model reads temporal features %s which the dataset lacks" % ", ".join(missing))
            return [dataset.temporal_names.index(f) for f in self.temporal_names]
        if len(dataset.temporal_names) != len(self.temporal_names):
            raise ContractError("Model expects %s temporal features, dataset has %s" %
                                (len(self.temporal_names), len(dataset.temporal_names)))
        return list(range(len(self.temporal_names)))

    def build(self, dataset: Dataset) -> np.ndarray:
        temporal = dataset.temporal
        valid = temporal.valid_steps()
        cols = self._temporal_columns(dataset)
        usable = (temporal.observed_mask[:, :, cols] == 1) & valid[:, :, None]
        parts = [np.where(usable, np.nan_to_num(temporal.values[:, :, cols]), 0.0)]

        n, t = valid.shape
        if self.static_mode == Mode.CONCATENATE:
            if len(dataset.static_names) != len(self.static_names):
                raise ContractError("Model expects %s static features, dataset has %s" %
                                    (len(self.static_names), len(dataset.static_names)))
            static = np.where(dataset.static.observed_mask == 1, np.nan_to_num(dataset.static.values), 0.0)
            parts.append(np.where(valid[:, :, None], static[:, None, :], 0.0))
        if self.time_mode == Mode.CONCATENATE:
            dt = np.zeros((n, t))
            if t > 1:
                dt[:, 1:] = np.diff(temporal.time, axis=1)
            dt = np.where(valid, dt, 0.0)
            parts.append(dt[:, :, None])
        return np.concatenate(parts, axis=2)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "temporal_names": self.temporal_names,
            "static_names": self.static_names,
            "static_mode": self.static_mode,
            "time_mode": self.time_mode,
            "restricted": self.restricted,
        }

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> 'InputLayout':
        return InputLayout(d["temporal_names"], d["static_names"], d["static_mode"], d["time_mode"],
                           d.get("restricted", False))


def get_hyperparameter_space(model_type: str) -> HyperparameterSpace:
    model_type = check_model_type(model_type)
    learning_rate = Dimension("learning_rate", DimensionKinds.CONTINUOUS, [1e-4, 1e-2], log=True)
    if model_type == LINEAR:
        return HyperparameterSpace([
            Dimension("ridge", DimensionKinds.CONTINUOUS, [1e-5, 1.0], log=True),
            learning_rate,
        ])
    return HyperparameterSpace([
        Dimension("h_dim", DimensionKinds.DISCRETE, [16, 32, 64, 100, 128]),
        Dimension("n_layer", DimensionKinds.DISCRETE, [1, 2, 3]),
        learning_rate,
        Dimension("batch_size", DimensionKinds.DISCRETE, [32, 64, 128]),
    ])


class SequenceModel(Predictor):
    """
    The built-in predictors: a per-step linear readout (``linear``), a vanilla RNN (``rnn``) or a GRU (``gru``)
    with a sigmoid head and masked binary cross-entropy for classification, an identity head and masked squared
    error for regression. Online problems are supervised at every valid step; one-shot problems only at each
    instance's final valid step. Training keeps the weights of the epoch with the best validation score.
    """
    param_names = ["model_type", "h_dim", "n_layer", "batch_size", "epoch", "learning_rate", "ridge",
                   "static_mode", "time_mode", "seed", "model_id", "model_path", "input_features"]

    def __init__(self, model_type: str = GRU, h_dim: int = 32, n_layer: int = 1, batch_size: int = 64,
                 epoch: int = 20, learning_rate: float = 1e-3, ridge: float = 1e-4,
                 static_mode: str = Mode.CONCATENATE, time_mode: str = Mode.CONCATENATE, seed: int = 0,
                 model_id: str = "model", model_path: str = "tmp",
                 input_features: Optional[List[str]] = None) -> None:
        super().__init__(model_id, model_path)
        self.model_type = check_model_type(model_type)
        for name, value in (("h_dim", h_dim), ("n_layer", n_layer), ("batch_size", batch_size), ("epoch", epoch)):
            if int(value) < 1:
                raise ParameterError("%s must be at least 1, not %s" % (name, highlight(str(value))))
        if not learning_rate > 0:
            raise ParameterError("learning_rate must be positive, not %s" % highlight(str(learning_rate)))
        if ridge < 0:
            raise ParameterError("ridge must be nonnegative")
        self.h_dim = int(h_dim)
        self.n_layer = int(n_layer)
        self.batch_size = int(batch_size)
        self.epoch = int(epoch)
        self.learning_rate = float(learning_rate)
        self.ridge = float(ridge)
        self.static_mode = Mode.parse(static_mode)
        self.time_mode = Mode.parse(time_mode)
        self.seed = int(seed)
        self.input_features = list(input_features) if input_features else None

        self.params = {}  # type: network.Params
        self.layout = None  # type: Optional[InputLayout]
        self.label_names = []  # type: List[str]
        self.metric = None  # type: Optional[str]
        self.history = []  # type: List[Dict[str, Any]]

    def get_hyperparameter_space(self) -> HyperparameterSpace:
        return get_hyperparameter_space(self.model_type)

    def _forward_kwargs(self) -> Dict[str, Any]:
        return dict(model_type=self.model_type, n_layer=self.n_layer, task=self.task)

    def _fit(self, dataset: Dataset) -> None:
        spec = dataset.require_problem()
        self.task, self.problem, self.metric = spec.task, spec.problem, spec.metric
        self.label_names = list(dataset.label_names)

        train = dataset.fit_rows()
        if not len(train):
            raise DataError("Can't fit %s: the train fold is empty" % highlight(self.model_id))
        val = dataset.fold_indices(Fold.VAL)

        self.layout = InputLayout.for_dataset(dataset, self.static_mode, self.time_mode, self.input_features)
        X = self.layout.build(dataset)
        Y, M = label_steps(dataset)
        Y = np.nan_to_num(Y)

        rng = np.random.default_rng(self.seed)
        params = network.init_params(self.model_type, X.shape[2], self.h_dim, self.n_layer, Y.shape[2], rng)
        optimizer = network.Adam(self.learning_rate)
        kwargs = self._forward_kwargs()

        best = None  # type: Optional[network.Params]
        best_score = np.nan
        best_loss = np.inf
        self.history = []
        for epoch in progress(range(self.epoch), total=self.epoch, desc=self.model_id):
            order = rng.permutation(train)
            losses = []
            for start in range(0, len(order), self.batch_size):
                batch = order[start:start + self.batch_size]
                loss, grads = network.loss_and_grad(params, X[batch], Y[batch], M[batch], ridge=self.ridge, **kwargs)
                optimizer.step(params, grads)
                losses.append(loss)
            entry = {"epoch": epoch, "train_loss": float(np.mean(losses))}  # type: Dict[str, Any]

            if len(val):
                H, _ = network.encode(params, X[val], self.model_type, self.n_layer)
                logits = network.readout(params, H)
                val_loss, _ = network.masked_loss(logits, Y[val], M[val], self.task)
                val_score = masked_score(spec.metric, Y[val], M[val], network.activate(logits, self.task))
                entry["val_loss"] = val_loss
                entry["val_score"] = val_score
                current = np.nan if val_score is None else val_score
                # the metric decides once it is defined, the loss before that
                if np.isnan(current) and np.isnan(best_score):
                    improved = val_loss < best_loss
                else:
                    improved = better(spec.metric, current, best_score)
                if best is None or improved:
                    best, best_score, best_loss = network.copy_params(params), current, val_loss
            self.history.append(entry)

        self.params = best if best is not None else params
        print_debug("Fitted %s (%s) in %s epochs, final train loss %.4f" %
                    (highlight(self.model_id), self.model_type, self.epoch, self.history[-1]["train_loss"]))

    def inputs(self, dataset: Dataset) -> np.ndarray:
        self.check_fitted()
        return self.layout.build(dataset)  # type: ignore

    def _predict_steps(self, dataset: Dataset) -> np.ndarray:
        X = self.inputs(dataset)
        out = network.forward(self.params, X, batch_size=max(self.batch_size, 256), **self._forward_kwargs())
        return np.where(dataset.temporal.valid_steps()[:, :, None], out, 0.0)

    def predict_inputs(self, X: np.ndarray) -> np.ndarray:
        """
        Outputs for an already built input tensor, for callers that perturb inputs directly.
        """
        self.check_fitted()
        return network.forward(self.params, X, batch_size=max(self.batch_size, 256), **self._forward_kwargs())

    def hidden_states(self, X: np.ndarray) -> np.ndarray:
        self.check_fitted()
        H, _ = network.encode(self.params, X, self.model_type, self.n_layer)
        return H

    def header(self) -> Dict[str, Any]:
        return {
            "class": persist.class_path(self),
            "params": self.get_params(),
            "layout": self.layout.to_dict() if self.layout else None,
            "task": self.task,
            "problem": self.problem,
            "metric": self.metric,
            "label_names": self.label_names,
            "history": self.history,
        }

    def save(self, path: Optional[str] = None) -> str:
        self.check_fitted()
        return persist.write_arrays(path or self.get_path(), self.header(), self.params)

    @classmethod
    def from_state(cls, header: Dict[str, Any], arrays: Dict[str, np.ndarray], path: str) -> 'SequenceModel':
        model = cls(**header["params"])
        model.params = {k: np.array(v, dtype=float) for k, v in arrays.items()}
        model.layout = InputLayout.from_dict(header["layout"])
        model.task, model.problem, model.metric = header["task"], header["problem"], header.get("metric")
        model.label_names = header.get("label_names", [])
        model.history = header.get("history", [])
        expected = network.init_params(model.model_type, model.layout.input_dim, model.h_dim, model.n_layer,
                                       len(model.label_names), np.random.default_rng(0))
        for k, v in expected.items():
            if k not in model.params or model.params[k].shape != v.shape:
                raise DataError("Model file %s is inconsistent: parameter %s is missing or misshapen" %
                                (highlight(path), highlight(k)))
        model.fitted = True
        return model

    @classmethod
    def load(cls, path: str) -> 'SequenceModel':
        model = persist.load_model(path)
        if not isinstance(model, cls):
            raise DataError("%s holds a %s, not a %s" % (highlight(path), model.__class__.__name__, cls.__name__))
        return model


def make_predictor(model_type: str, **params: Any) -> SequenceModel:
    return SequenceModel(model_type=model_type, **params)


def fit(model: Predictor, dataset: Dataset) -> Predictor:
    return model.fit(dataset)  # type: ignore


def predict(model: Predictor, dataset: Dataset) -> np.ndarray:
    return model.predict(dataset)


def save(model: Predictor, path: Optional[str] = None) -> str:
    return model.save(path)


def load_model(path: str) -> Predictor:
    return persist.load_model(path)


def clone_unfitted(model: Union[Predictor, Dict[str, Any]], model_id: str) -> Predictor:
    """
    A fresh, unfitted model with the same hyperparameters and a new ``model_id``. Accepts a model or a config
    dict of ``SequenceModel`` parameters.
    """
    if isinstance(model, dict):
        params = dict(model)
        params["model_id"] = model_id
        return SequenceModel(**params)
    return model.new(model_id)  # type: ignore
