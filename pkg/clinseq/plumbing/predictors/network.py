# -* encoding: utf-8 *-
# Numerics of the built-in sequence models: parameter initialisation, recurrent cells with their backward passes,
# masked losses and the optimiser. Parameters live in flat dicts keyed "<prefix><name>" ("l0.Wz", "dec.Wx",
# "Wo"), which is also how they are persisted.
from typing import Dict, List, Tuple, Any, Optional

import numpy as np
from scipy.special import expit

from clinseq.primitives import Task

Params = Dict[str, np.ndarray]

LINEAR = "linear"
RNN = "rnn"
GRU = "gru"

CELL_WEIGHTS = {
    RNN: (["Wx"], ["Wh"], ["b"]),
    GRU: (["Wz", "Wr", "Wn"], ["Uz", "Ur", "Un"], ["bz", "br", "bn"]),
}


def init_cell(params: Params, prefix: str, cell: str, d_in: int, h_dim: int, rng: np.random.Generator) -> None:
    """
    Adds one recurrent cell's weights to ``params``: uniform in +-1/sqrt(fan_in), zero biases.
    """
    w_in, w_rec, biases = CELL_WEIGHTS[cell]
    for name in w_in:
        bound = 1.0 / np.sqrt(max(d_in, 1))
        params[prefix + name] = rng.uniform(-bound, bound, size=(d_in, h_dim))
    for name in w_rec:
        bound = 1.0 / np.sqrt(h_dim)
        params[prefix + name] = rng.uniform(-bound, bound, size=(h_dim, h_dim))
    for name in biases:
        params[prefix + name] = np.zeros(h_dim)


def init_params(model_type: str, d_in: int, h_dim: int, n_layer: int, n_out: int,
                rng: np.random.Generator) -> Params:
    params = {}  # type: Params
    top = d_in
    if model_type != LINEAR:
        for l in range(n_layer):
            init_cell(params, "l%d." % l, model_type, d_in if l == 0 else h_dim, h_dim, rng)
        top = h_dim
    bound = 1.0 / np.sqrt(max(top, 1))
    params["Wo"] = rng.uniform(-bound, bound, size=(top, n_out))
    params["bo"] = np.zeros(n_out)
    return params


def rnn_step(params: Params, prefix: str, x: np.ndarray, h: np.ndarray) -> Tuple[np.ndarray, Tuple]:
    hn = np.tanh(x @ params[prefix + "Wx"] + h @ params[prefix + "Wh"] + params[prefix + "b"])
    return hn, (x, h, hn)


def rnn_step_backward(params: Params, prefix: str, cache: Tuple, dhn: np.ndarray,
                      grads: Params) -> Tuple[np.ndarray, np.ndarray]:
    x, h, hn = cache
    da = dhn * (1.0 - hn ** 2)
    grads[prefix + "Wx"] += x.T @ da
    grads[prefix + "Wh"] += h.T @ da
    grads[prefix + "b"] += da.sum(axis=0)
    return da @ params[prefix + "Wx"].T, da @ params[prefix + "Wh"].T


def gru_step(params: Params, prefix: str, x: np.ndarray, h: np.ndarray) -> Tuple[np.ndarray, Tuple]:
    p = prefix
    z = expit(x @ params[p + "Wz"] + h @ params[p + "Uz"] + params[p + "bz"])
    r = expit(x @ params[p + "Wr"] + h @ params[p + "Ur"] + params[p + "br"])
    hu = h @ params[p + "Un"]
    n = np.tanh(x @ params[p + "Wn"] + r * hu + params[p + "bn"])
    hn = (1.0 - z) * n + z * h
    return hn, (x, h, z, r, hu, n)


def gru_step_backward(params: Params, prefix: str, cache: Tuple, dhn: np.ndarray,
                      grads: Params) -> Tuple[np.ndarray, np.ndarray]:
    p = prefix
    x, h, z, r, hu, n = cache
    dn = dhn * (1.0 - z)
    dz = dhn * (h - n)
    dh = dhn * z

    dan = dn * (1.0 - n ** 2)
    grads[p + "Wn"] += x.T @ dan
    grads[p + "bn"] += dan.sum(axis=0)
    dx = dan @ params[p + "Wn"].T
    dhu = dan * r
    grads[p + "Un"] += h.T @ dhu
    dh += dhu @ params[p + "Un"].T

    dar = dan * hu * r * (1.0 - r)
    daz = dz * z * (1.0 - z)
    for gate, da in (("z", daz), ("r", dar)):
        grads[p + "W" + gate] += x.T @ da
        grads[p + "U" + gate] += h.T @ da
        grads[p + "b" + gate] += da.sum(axis=0)
        dx += da @ params[p + "W" + gate].T
        dh += da @ params[p + "U" + gate].T
    return dx, dh


STEPS = {
    RNN: (rnn_step, rnn_step_backward),
    GRU: (gru_step, gru_step_backward),
}


def encode(params: Params, X: np.ndarray, model_type: str, n_layer: int) -> Tuple[np.ndarray, List[List[Tuple]]]:
    """
    Runs the stacked cells over ``X`` ``[batch][step][input]`` and returns the top layer's hidden states plus the
    per-layer, per-step caches for ``encode_backward``. A linear model's "hidden state" is its input.
    """
    if model_type == LINEAR:
        return X, []
    step = STEPS[model_type][0]
    inp = X
    caches = []  # type: List[List[Tuple]]
    for l in range(n_layer):
        prefix = "l%d." % l
        h_dim = params[prefix + CELL_WEIGHTS[model_type][1][0]].shape[0]
        b, t = inp.shape[:2]
        h = np.zeros((b, h_dim))
        out = np.empty((b, t, h_dim))
        layer = []
        for s in range(t):
            h, cache = step(params, prefix, inp[:, s], h)
            out[:, s] = h
            layer.append(cache)
        caches.append(layer)
        inp = out
    return inp, caches


def encode_backward(params: Params, caches: List[List[Tuple]], d_top: np.ndarray, model_type: str,
                    grads: Params) -> np.ndarray:
    """
    Backpropagates ``d_top`` (gradient w.r.t. the top hidden states) through time and layers, accumulating into
    ``grads``. Returns the gradient w.r.t. the inputs.
    """
    if model_type == LINEAR:
        return d_top
    step_backward = STEPS[model_type][1]
    d_out = d_top
    for l in reversed(range(len(caches))):
        prefix = "l%d." % l
        layer = caches[l]
        d_in = np.empty((d_out.shape[0], d_out.shape[1], layer[0][0].shape[1]))
        dh_next = np.zeros(d_out.shape[0:1] + d_out.shape[2:])
        for s in reversed(range(len(layer))):
            dx, dh_next = step_backward(params, prefix, layer[s], d_out[:, s] + dh_next, grads)
            d_in[:, s] = dx
        d_out = d_in
    return d_out


def masked_loss(logits: np.ndarray, Y: np.ndarray, M: np.ndarray, task: str) -> Tuple[float, np.ndarray]:
    """
    Mean loss over the valid label cells and its gradient w.r.t. ``logits``. Cells with ``M == 0`` contribute
    nothing, whatever their label value.
    """
    valid = M == 1
    count = max(int(valid.sum()), 1)
    y = np.where(valid, Y, 0.0)
    if task == Task.CLASSIFICATION:
        cell = np.logaddexp(0.0, logits) - y * logits
        dcell = expit(logits) - y
    else:
        cell = (logits - y) ** 2
        dcell = 2.0 * (logits - y)
    cell = np.where(valid, cell, 0.0)
    return float(cell.sum() / count), np.where(valid, dcell, 0.0) / count


def readout(params: Params, H: np.ndarray) -> np.ndarray:
    return H @ params["Wo"] + params["bo"]


def activate(logits: np.ndarray, task: str) -> np.ndarray:
    return expit(logits) if task == Task.CLASSIFICATION else logits


def loss_and_grad(params: Params, X: np.ndarray, Y: np.ndarray, M: np.ndarray, *, model_type: str,
                  n_layer: int, task: str, ridge: float = 0.0) -> Tuple[float, Params]:
    H, caches = encode(params, X, model_type, n_layer)
    logits = readout(params, H)
    loss, dlogits = masked_loss(logits, Y, M, task)
    loss += ridge * float((params["Wo"] ** 2).sum())

    grads = {k: np.zeros_like(v) for k, v in params.items()}
    b, t, h = H.shape
    grads["Wo"] += H.reshape(b * t, h).T @ dlogits.reshape(b * t, -1) + 2.0 * ridge * params["Wo"]
    grads["bo"] += dlogits.sum(axis=(0, 1))
    encode_backward(params, caches, dlogits @ params["Wo"].T, model_type, grads)
    return loss, grads


def forward(params: Params, X: np.ndarray, *, model_type: str, n_layer: int, task: str,
            batch_size: Optional[int] = None) -> np.ndarray:
    """
    Activated outputs ``[instance][step][label]``, computed in batches.
    """
    n = X.shape[0]
    batch_size = batch_size or max(n, 1)
    out = []
    for start in range(0, n, batch_size):
        H, _ = encode(params, X[start:start + batch_size], model_type, n_layer)
        out.append(activate(readout(params, H), task))
    if not out:
        return np.zeros((0, X.shape[1], params["bo"].shape[0]))
    return np.concatenate(out, axis=0)


class Adam:
    """
    First/second-moment gradient steps (0.9/0.999, eps 1e-8), optionally clipping the global gradient norm.
    """
    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 clip_norm: Optional[float] = 5.0) -> None:
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.t = 0
        self.m = {}  # type: Params
        self.v = {}  # type: Params

    def step(self, params: Params, grads: Params) -> None:
        if self.clip_norm:
            norm = np.sqrt(sum(float((g ** 2).sum()) for g in grads.values()))
            if norm > self.clip_norm:
                grads = {k: g * (self.clip_norm / norm) for k, g in grads.items()}
        self.t += 1
        for k, g in grads.items():
            m = self.m.get(k)
            if m is None:
                m = self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g ** 2
            m_hat = m / (1.0 - self.beta1 ** self.t)
            v_hat = v / (1.0 - self.beta2 ** self.t)
            params[k] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def copy_params(params: Params) -> Params:
    return {k: v.copy() for k, v in params.items()}


def param_count(params: Params) -> int:
    return sum(int(v.size) for v in params.values())


def describe(params: Params) -> Dict[str, Any]:
    return {k: list(v.shape) for k, v in sorted(params.items())}
