# -* encoding: utf-8 *-
from typing import List, Optional, Tuple

import numpy as np
from scipy.stats import qmc

from clinseq.plumbing.automl.encoding import ConfigEncoding, Config
from clinseq.plumbing.automl.gp import GaussianProcess, expected_improvement, median_lengthscales
from clinseq.plumbing.automl.trace import OptimizationTrace
from clinseq.utils import ParameterError, highlight, print_debug

GP = "gp"
RANDOM = "random"
METHODS = [GP, RANDOM]


class CandidateSearch:
    """
    Proposes the next configuration to train. ``random`` samples uniformly. ``gp`` starts with a Latin hypercube
    design of ``min(n_init, num_iter)`` points, then fits a GP to the trace and picks the best of
    ``n_candidates`` random configurations by expected improvement. Length-scales follow the median heuristic
    and are refreshed every ``refresh`` GP fits.

    With ``stepwise`` the GP models the score of (configuration, normalised step) pairs and the acquisition
    sums the per-step expected improvements over the per-step incumbents.
    """
    def __init__(self, encoding: ConfigEncoding, num_iter: int, seed: int = 0, method: str = GP,
                 stepwise: bool = False, n_candidates: int = 512, n_init: int = 5, refresh: int = 5,
                 noise: float = 1e-3) -> None:
        if method not in METHODS:
            raise ParameterError("Unknown search method %s (expected gp or random)" % highlight(str(method)))
        if int(num_iter) < 1:
            raise ParameterError("The optimisation budget must be at least one iteration, not %s" %
                                 highlight(str(num_iter)))
        self.encoding = encoding
        self.method = method
        self.stepwise = stepwise
        self.n_candidates = n_candidates
        self.refresh = refresh
        self.noise = noise
        self.rng = np.random.default_rng(seed)
        self.lengthscales = None  # type: Optional[np.ndarray]
        self.gp_fits = 0
        self.design = np.zeros((0, encoding.unit_dims))
        if method == GP and encoding.unit_dims:
            self.design = qmc.LatinHypercube(d=encoding.unit_dims, seed=seed).random(min(n_init, int(num_iter)))

    def observations(self, trace: OptimizationTrace) -> Tuple[np.ndarray, np.ndarray, List[float]]:
        sign = trace.metric.sign
        X, y = [], []
        best = []  # type: List[float]
        for e in trace:
            scores = e.step_scores
            if self.stepwise:
                t = len(scores)
                if len(best) < t:
                    best += [np.nan] * (t - len(best))
                for s, v in enumerate(scores):
                    if np.isfinite(v):
                        X.append(np.append(e.encoded, s / max(t - 1, 1)))
                        y.append(sign * v)
                        best[s] = sign * v if np.isnan(best[s]) else max(best[s], sign * v)
            elif np.isfinite(e.score):
                X.append(e.encoded)
                y.append(sign * e.score)
        return np.asarray(X), np.asarray(y), best

    def propose(self, trace: OptimizationTrace) -> Config:
        i = len(trace)
        if self.method == RANDOM or not self.encoding.unit_dims:
            return self.encoding.sample(self.rng)
        if i < len(self.design):
            return self.encoding.from_unit(self.design[i])

        X, y, best = self.observations(trace)
        if len(y) < 2:
            return self.encoding.sample(self.rng)
        if self.lengthscales is None or self.gp_fits % self.refresh == 0 or len(self.lengthscales) != X.shape[1]:
            self.lengthscales = median_lengthscales(X)
        gp = GaussianProcess(self.noise, lengthscales=self.lengthscales).fit(X, y)
        self.gp_fits += 1

        candidates = [self.encoding.sample(self.rng) for _ in range(self.n_candidates)]
        C = np.stack([self.encoding.encode(c) for c in candidates])
        if self.stepwise:
            t = len(best)
            acquisition = np.zeros(len(candidates))
            for s in range(t):
                if np.isnan(best[s]):
                    continue
                joint = np.hstack([C, np.full((len(C), 1), s / max(t - 1, 1))])
                mean, std = gp.predict(joint)
                acquisition += expected_improvement(mean, std, best[s])
        else:
            mean, std = gp.predict(C)
            acquisition = expected_improvement(mean, std, float(y.max()))
        pick = int(np.argmax(acquisition))
        print_debug("Candidate %s proposed with expected improvement %.4g" % (i, acquisition[pick]))
        return candidates[pick]
