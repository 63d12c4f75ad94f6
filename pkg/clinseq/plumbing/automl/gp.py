# -* encoding: utf-8 *-
# Surrogate numerics of the optimisers: a zero-mean Gaussian process with an ARD squared-exponential kernel on
# standardized targets, and expected improvement for maximisation.
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import norm

from clinseq.utils import ContractError, ParameterError


def median_lengthscales(X: np.ndarray) -> np.ndarray:
    """
    Per-dimension median of the nonzero pairwise distances; 1 where a dimension never varies.
    """
    X = np.asarray(X, dtype=float)
    out = np.ones(X.shape[1])
    if len(X) < 2:
        return out
    iu = np.triu_indices(len(X), k=1)
    for j in range(X.shape[1]):
        diffs = np.abs(X[:, None, j] - X[None, :, j])[iu]
        diffs = diffs[diffs > 0]
        if len(diffs):
            out[j] = float(np.median(diffs))
    return out


def se_kernel(A: np.ndarray, B: np.ndarray, lengthscales: np.ndarray) -> np.ndarray:
    a = A / lengthscales
    b = B / lengthscales
    sq = (a ** 2).sum(axis=1)[:, None] + (b ** 2).sum(axis=1)[None, :] - 2.0 * a @ b.T
    return np.exp(-0.5 * np.maximum(sq, 0.0))


class GaussianProcess:
    def __init__(self, noise: float = 1e-3, jitter: float = 1e-8, lengthscales: Optional[np.ndarray] = None) -> None:
        if noise < 0 or jitter < 0:
            raise ParameterError("GP noise and jitter must be nonnegative")
        self.noise = noise
        self.jitter = jitter
        self.lengthscales = lengthscales
        self.X = np.zeros((0, 0))
        self.y_mean = 0.0
        self.y_std = 1.0
        self.factor = None  # type: Optional[Tuple[np.ndarray, bool]]
        self.alpha = np.zeros(0)

    def fit(self, X: np.ndarray, y: np.ndarray) -> 'GaussianProcess':
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if len(X) != len(y) or not len(X):
            raise ParameterError("The GP needs matching, nonempty inputs and targets")
        if self.lengthscales is None:
            self.lengthscales = median_lengthscales(X)
        self.X = X
        self.y_mean = float(y.mean())
        std = float(y.std())
        self.y_std = std if std > 0 else 1.0
        z = (y - self.y_mean) / self.y_std
        K = se_kernel(X, X, self.lengthscales) + (self.noise + self.jitter) * np.eye(len(X))
        self.factor = cho_factor(K, lower=True)
        self.alpha = cho_solve(self.factor, z)
        return self

    def predict(self, Xs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Posterior mean and standard deviation of the latent function at ``Xs``, in target units.
        """
        if self.factor is None:
            raise ContractError("GaussianProcess used before fit()")
        Ks = se_kernel(np.asarray(Xs, dtype=float), self.X, self.lengthscales)  # type: ignore
        mean = Ks @ self.alpha
        v = cho_solve(self.factor, Ks.T)
        var = np.maximum(1.0 - (Ks * v.T).sum(axis=1), 0.0)
        return self.y_mean + self.y_std * mean, self.y_std * np.sqrt(var)


def expected_improvement(mean: np.ndarray, std: np.ndarray, best: float) -> np.ndarray:
    """
    Expected improvement over ``best`` for maximisation. Points with zero posterior spread improve by
    ``max(mean - best, 0)``.
    """
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    improvement = mean - best
    safe = np.where(std > 0, std, 1.0)
    z = improvement / safe
    ei = improvement * norm.cdf(z) + safe * norm.pdf(z)
    return np.maximum(np.where(std > 0, ei, np.maximum(improvement, 0.0)), 0.0)
