# -* encoding: utf-8 *-
# Treatment-effects pathway. The forecaster conditions on the recorded history and rolls outcomes forward under
# a given action plan. It makes no adjustment for confounding: its outputs are conditional forecasts, not causal
# effect estimates when treatment assignment depended on the patient's state.
from typing import Dict, Any, List, Optional, Union

import numpy as np

from clinseq import persist
from clinseq.base import Predictor, HyperparameterSpace
from clinseq.data import Dataset, TemporalTensor
from clinseq.primitives import Mode, ProblemKind
from clinseq.plumbing.predictors import SequenceModel, get_hyperparameter_space, network
from clinseq.plumbing.predictors.network import RNN, GRU
from clinseq.utils import ParameterError, DataError, highlight, print_debug, progress

ACTION_PREFIX = "action:"


def with_actions(dataset: Dataset) -> Dataset:
    """
    The dataset with its actions appended as fully observed temporal input features ``action:<name>``.
    """
    if dataset.actions is None:
        raise DataError("This dataset has no actions; list the treatment features in the problem's "
                        "%s" % highlight("treatment_names"))
    temporal = dataset.temporal
    valid = temporal.valid_steps()[:, :, None]
    acts = dataset.actions.values
    values = np.concatenate([temporal.values, np.where(valid, acts, np.nan)], axis=2)
    mask = np.concatenate([temporal.observed_mask, np.repeat(valid, acts.shape[2], axis=2).astype(np.int8)], axis=2)
    return dataset.replace(
        temporal=TemporalTensor(values, mask, temporal.time, temporal.seq_len),
        temporal_names=dataset.temporal_names + [ACTION_PREFIX + a for a in dataset.actions.names],
    )


class TreatmentModel(Predictor):
    """
    A recurrent encoder over covariates and actions (a ``SequenceModel`` on ``with_actions(dataset)``) plus a
    decoder cell that starts from the encoder's hidden state and rolls forward ``projection_horizon`` steps. Each
    decoder step consumes the planned action and the previous outcome estimate and emits the next one.

    A roll-out from step ``t0`` keeps the history before ``t0`` fixed; decoder step ``k`` uses the action at
    ``t0 + k`` and estimates that step's label. Factual predictions at step ``t`` are the first step of the roll-out
    from ``t`` under the recorded action, so a counterfactual query that replays the recorded actions returns them
    unchanged.
    """
    param_names = ["model_type", "h_dim", "n_layer", "batch_size", "epoch", "learning_rate", "static_mode",
                   "time_mode", "seed", "projection_horizon", "model_id", "model_path"]

    def __init__(self, model_type: str = GRU, h_dim: int = 32, n_layer: int = 1, batch_size: int = 64,
                 epoch: int = 20, learning_rate: float = 1e-3, static_mode: str = Mode.CONCATENATE,
                 time_mode: str = Mode.CONCATENATE, seed: int = 0, projection_horizon: int = 5,
                 model_id: str = "treatment", model_path: str = "tmp") -> None:
        super().__init__(model_id, model_path)
        if model_type not in (RNN, GRU):
            raise ParameterError("The treatment model needs a recurrent encoder (rnn or gru), not %s" %
                                 highlight(str(model_type)))
        if int(projection_horizon) < 1:
            raise ParameterError("projection_horizon must be at least 1, not %s" %
                                 highlight(str(projection_horizon)))
        self.model_type = model_type
        self.h_dim = int(h_dim)
        self.n_layer = int(n_layer)
        self.batch_size = int(batch_size)
        self.epoch = int(epoch)
        self.learning_rate = float(learning_rate)
        self.static_mode = Mode.parse(static_mode)
        self.time_mode = Mode.parse(time_mode)
        self.seed = int(seed)
        self.projection_horizon = int(projection_horizon)

        self.encoder = None  # type: Optional[SequenceModel]
        self.decoder = {}  # type: network.Params
        self.action_names = []  # type: List[str]
        self.history = []  # type: List[Dict[str, Any]]

    def get_hyperparameter_space(self) -> HyperparameterSpace:
        return get_hyperparameter_space(self.model_type)

    def make_encoder(self) -> SequenceModel:
        return SequenceModel(
            model_type=self.model_type, h_dim=self.h_dim, n_layer=self.n_layer, batch_size=self.batch_size,
            epoch=self.epoch, learning_rate=self.learning_rate, ridge=0.0, static_mode=self.static_mode,
            time_mode=self.time_mode, seed=self.seed, model_id="%s-encoder" % self.model_id,
            model_path=self.model_path,
        )

    def _fit(self, dataset: Dataset) -> None:
        spec = dataset.require_problem()
        if spec.problem != ProblemKind.ONLINE:
            raise ParameterError("The treatment pathway forecasts online labels; this problem is %s" % spec.problem)
        augmented = with_actions(dataset)
        self.task, self.problem = spec.task, spec.problem
        self.action_names = list(dataset.actions.names)  # type: ignore

        self.encoder = self.make_encoder()
        self.encoder.fit(augmented)

        X = self.encoder.inputs(augmented)
        H = self.encoder.hidden_states(X)
        P = self.encoder.predict_inputs(X)
        Y = np.nan_to_num(dataset.labels.values)  # type: ignore
        M = dataset.labels.valid_mask  # type: ignore
        A = dataset.actions.values  # type: ignore
        train = dataset.fit_rows()

        rng = np.random.default_rng(self.seed + 1)
        n_out = Y.shape[2]
        self.decoder = {}
        network.init_cell(self.decoder, "dec.", self.model_type, A.shape[2] + n_out, H.shape[2], rng)
        bound = 1.0 / np.sqrt(H.shape[2])
        self.decoder["dec.Wo"] = rng.uniform(-bound, bound, size=(H.shape[2], n_out))
        self.decoder["dec.bo"] = np.zeros(n_out)

        optimizer = network.Adam(self.learning_rate)
        self.history = []
        for epoch in progress(range(self.epoch), total=self.epoch, desc=self.model_id):
            order = rng.permutation(train)
            losses = []
            for start in range(0, len(order), self.batch_size):
                batch = order[start:start + self.batch_size]
                rollout = self._training_rollouts(H[batch], P[batch], A[batch], Y[batch], M[batch],
                                                  dataset.temporal.seq_len[batch])
                if rollout is None:
                    continue
                loss, grads = self._decoder_loss_and_grad(*rollout)
                optimizer.step(self.decoder, grads)
                losses.append(loss)
            self.history.append({"epoch": epoch, "decoder_loss": float(np.mean(losses)) if losses else None})
        print_debug("Fitted treatment model %s" % highlight(self.model_id))

    def _training_rollouts(self, H: np.ndarray, P: np.ndarray, A: np.ndarray, Y: np.ndarray, M: np.ndarray,
                           seq_len: np.ndarray) -> Optional[tuple]:
        """
        Flattens every (instance, start step) pair of a batch into one decoder sequence of length
        ``projection_horizon``.
        """
        n, t = H.shape[:2]
        if t < 2:
            return None
        starts = np.arange(1, t)
        k = np.arange(self.projection_horizon)
        steps = starts[:, None] + k[None, :]  # [start][k]
        inside = steps < t
        clipped = np.minimum(steps, t - 1)

        usable = starts[None, :] < seq_len[:, None]  # [instance][start]
        inst, sidx = np.nonzero(usable)
        if not len(inst):
            return None
        h0 = H[inst, starts[sidx] - 1]
        prev0 = P[inst, starts[sidx] - 1]
        acts = A[inst[:, None], clipped[sidx]] * inside[sidx][:, :, None]
        targets = Y[inst[:, None], clipped[sidx]]
        masks = M[inst[:, None], clipped[sidx]] * inside[sidx][:, :, None]
        return h0, prev0, acts, targets, masks

    def _decoder_forward(self, h0: np.ndarray, prev0: np.ndarray, acts: np.ndarray) -> tuple:
        step = network.STEPS[self.model_type][0]
        h, prev = h0, prev0
        hs, caches, logits = [], [], []
        for k in range(acts.shape[1]):
            x = np.concatenate([acts[:, k], prev], axis=1)
            h, cache = step(self.decoder, "dec.", x, h)
            logit = h @ self.decoder["dec.Wo"] + self.decoder["dec.bo"]
            prev = network.activate(logit, self.task)
            hs.append(h)
            caches.append(cache)
            logits.append(logit)
        return np.stack(hs, axis=1), caches, np.stack(logits, axis=1)

    def _decoder_loss_and_grad(self, h0: np.ndarray, prev0: np.ndarray, acts: np.ndarray, targets: np.ndarray,
                               masks: np.ndarray) -> tuple:
        hs, caches, logits = self._decoder_forward(h0, prev0, acts)
        loss, dlogits = network.masked_loss(logits, targets, masks, self.task)
        grads = {k: np.zeros_like(v) for k, v in self.decoder.items()}
        step_backward = network.STEPS[self.model_type][1]
        dh_next = np.zeros_like(h0)
        for k in reversed(range(acts.shape[1])):
            grads["dec.Wo"] += hs[:, k].T @ dlogits[:, k]
            grads["dec.bo"] += dlogits[:, k].sum(axis=0)
            dh = dlogits[:, k] @ self.decoder["dec.Wo"].T + dh_next
            _, dh_next = step_backward(self.decoder, "dec.", caches[k], dh, grads)
        return loss, grads

    def _predict_steps(self, dataset: Dataset) -> np.ndarray:
        """
        Factual predictions: one decoder step from the history before ``t`` under the action recorded at ``t``.
        Step 0 has no history and keeps the encoder's own output.
        """
        augmented = with_actions(dataset)
        X = self.encoder.inputs(augmented)  # type: ignore
        H = self.encoder.hidden_states(X)  # type: ignore
        P = self.encoder.predict_inputs(X)  # type: ignore
        A = dataset.actions.values  # type: ignore
        rows = np.arange(dataset.n_instances)
        out = P.copy()
        for t in range(1, dataset.max_len):
            out[:, t] = self._roll(H, P, rows, np.full(len(rows), t), A[:, t:t + 1])[:, 0]
        return np.where(dataset.temporal.valid_steps()[:, :, None], out, 0.0)

    def _roll(self, H: np.ndarray, P: np.ndarray, rows: np.ndarray, t0: np.ndarray, acts: np.ndarray) -> np.ndarray:
        # factual and counterfactual queries share this path, so replaying the recorded actions is exact
        _, _, logits = self._decoder_forward(H[rows, t0 - 1], P[rows, t0 - 1], acts)
        return network.activate(logits, self.task)

    def default_start(self, dataset: Dataset, horizon: int) -> np.ndarray:
        """
        Per-instance first projected step: as late as possible so the horizon still ends on a valid step.
        """
        return np.maximum(dataset.temporal.seq_len - horizon, 1)

    def predict_counterfactual(self, dataset: Dataset, planned_actions: np.ndarray, horizon: int,
                               start: Optional[Union[int, np.ndarray]] = None) -> np.ndarray:
        """
        Outcome estimates ``[instance][horizon][label]`` when the actions from step ``start`` on are replaced by
        ``planned_actions`` ``[instance][horizon][action]``.
        """
        self.check_fitted()
        if not 1 <= horizon <= self.projection_horizon:
            raise ParameterError("horizon %s exceeds the model's projection_horizon %s" %
                                 (highlight(str(horizon)), self.projection_horizon))
        planned = np.asarray(planned_actions, dtype=float)
        expected = (dataset.n_instances, horizon, len(self.action_names))
        if planned.shape != expected:
            raise ParameterError("planned_actions has shape %s, expected %s" % (planned.shape, expected))
        if dataset.max_len < 2:
            raise DataError("Counterfactual roll-outs need at least two steps of history")

        if start is None:
            t0 = self.default_start(dataset, horizon)
        else:
            t0 = np.broadcast_to(np.asarray(start, dtype=int), (dataset.n_instances,)).copy()
        t0 = np.clip(t0, 1, dataset.max_len - 1)

        augmented = with_actions(dataset)
        X = self.encoder.inputs(augmented)  # type: ignore
        H = self.encoder.hidden_states(X)  # type: ignore
        P = self.encoder.predict_inputs(X)  # type: ignore
        return self._roll(H, P, np.arange(dataset.n_instances), t0, planned)

    def recorded_actions(self, dataset: Dataset, horizon: int, start: Optional[Union[int, np.ndarray]] = None
                         ) -> np.ndarray:
        if dataset.actions is None:
            raise DataError("This dataset has no actions; list the treatment features in the problem's "
                            "%s" % highlight("treatment_names"))
        t0 = self.default_start(dataset, horizon) if start is None else \
            np.broadcast_to(np.asarray(start, dtype=int), (dataset.n_instances,))
        t0 = np.clip(t0, 1, dataset.max_len - 1)
        steps = np.minimum(t0[:, None] + np.arange(horizon)[None, :], dataset.max_len - 1)
        inside = (t0[:, None] + np.arange(horizon)[None, :]) < dataset.max_len
        return dataset.actions.values[np.arange(dataset.n_instances)[:, None], steps] * inside[:, :, None]

    def predict_factual_projection(self, dataset: Dataset, horizon: int,
                                   start: Optional[Union[int, np.ndarray]] = None) -> np.ndarray:
        """
        The roll-forward under the recorded actions; the same computation as a counterfactual query.
        """
        return self.predict_counterfactual(dataset, self.recorded_actions(dataset, horizon, start), horizon, start)

    def save(self, path: Optional[str] = None) -> str:
        self.check_fitted()
        arrays = {"enc." + k: v for k, v in self.encoder.params.items()}  # type: ignore
        arrays.update(self.decoder)
        header = {
            "class": persist.class_path(self),
            "params": self.get_params(),
            "encoder": self.encoder.header(),  # type: ignore
            "action_names": self.action_names,
            "task": self.task,
            "problem": self.problem,
            "history": self.history,
        }
        return persist.write_arrays(path or self.get_path(), header, arrays)

    @classmethod
    def from_state(cls, header: Dict[str, Any], arrays: Dict[str, np.ndarray], path: str) -> 'TreatmentModel':
        model = cls(**header["params"])
        enc = {k[4:]: v for k, v in arrays.items() if k.startswith("enc.")}
        model.encoder = SequenceModel.from_state(header["encoder"], enc, path)
        model.decoder = {k: np.array(v, dtype=float) for k, v in arrays.items() if k.startswith("dec.")}
        if "dec.Wo" not in model.decoder:
            raise DataError("Model file %s has no decoder weights" % highlight(path))
        model.action_names = header["action_names"]
        model.task, model.problem = header["task"], header["problem"]
        model.history = header.get("history", [])
        model.fitted = True
        return model

    @classmethod
    def load(cls, path: str) -> 'TreatmentModel':
        model = persist.load_model(path)
        if not isinstance(model, cls):
            raise DataError("%s holds a %s, not a treatment model" % (highlight(path), model.__class__.__name__))
        return model


def fit_treatment_model(config: Union[TreatmentModel, Dict[str, Any]], dataset: Dataset) -> TreatmentModel:
    model = config if isinstance(config, TreatmentModel) else TreatmentModel(**config)
    model.fit(dataset)
    return model


def predict_counterfactual(model: TreatmentModel, dataset: Dataset, planned_actions: np.ndarray,
                           horizon: int) -> np.ndarray:
    return model.predict_counterfactual(dataset, planned_actions, horizon)


from clinseq.plumbing.pathways.sensing import SensingPolicy, fit_sensing_policy, apply_sensing, \
    evaluate_sensing, export_selection  # noqa: E402
