# -* encoding: utf-8 *-
from typing import Dict, Any, Optional

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from clinseq.utils import ContractError, DataError, ParameterError, print_debug

LOGIT_CLIP = 13.8
MIN_SLOPE = 1e-6


def clipped_logit(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.clip(logit(np.asarray(p, dtype=float)), -LOGIT_CLIP, LOGIT_CLIP)


class PlattCalibrator:
    """
    Maps scores ``p`` to ``sigmoid(a * logit(p) + b)``, fitted by maximum likelihood on held-out labels. The slope
    is bounded below by a small positive constant, so the map is strictly increasing and never changes a ranking.
    """
    def __init__(self) -> None:
        self.a = 1.0
        self.b = 0.0
        self.fitted = False

    def fit(self, scores: np.ndarray, labels: np.ndarray, mask: Optional[np.ndarray] = None) -> 'PlattCalibrator':
        p = np.asarray(scores, dtype=float)
        y = np.asarray(labels, dtype=float)
        if p.shape != y.shape:
            raise ParameterError("Scores %s and labels %s differ in shape" % (p.shape, y.shape))
        keep = np.ones(p.shape, dtype=bool) if mask is None else np.asarray(mask) == 1
        p, y = p[keep], y[keep]
        if not np.isin(y, (0.0, 1.0)).all():
            raise DataError("Calibration needs binary 0/1 labels")
        if len(np.unique(y)) < 2:
            raise DataError("Calibration needs both classes in the validation labels")
        z = clipped_logit(p)

        def nll(theta: np.ndarray) -> tuple:
            a, b = theta
            s = a * z + b
            loss = np.logaddexp(0.0, s) - y * s
            d = expit(s) - y
            return float(loss.mean()), np.array([(d * z).mean(), d.mean()])

        result = minimize(nll, np.array([1.0, 0.0]), jac=True, method="L-BFGS-B",
                          bounds=[(MIN_SLOPE, None), (None, None)], options={"gtol": 1e-10, "maxiter": 1000})
        self.a, self.b = float(result.x[0]), float(result.x[1])
        self.fitted = True
        print_debug("Platt calibration fitted: a=%.4f b=%.4f" % (self.a, self.b))
        return self

    def transform(self, scores: np.ndarray) -> np.ndarray:
        if not self.fitted:
            raise ContractError("PlattCalibrator used before fit()")
        return expit(self.a * clipped_logit(scores) + self.b)

    __call__ = transform

    def todict(self) -> Dict[str, Any]:
        return {"method": "platt", "a": self.a, "b": self.b}

    @staticmethod
    def fromdict(d: Dict[str, Any]) -> 'PlattCalibrator':
        ret = PlattCalibrator()
        ret.a, ret.b = float(d["a"]), float(d["b"])
        ret.fitted = True
        return ret


def calibrate(scores: np.ndarray, labels: np.ndarray, mask: Optional[np.ndarray] = None) -> PlattCalibrator:
    return PlattCalibrator().fit(scores, labels, mask)
