"""scikit-learn style wrapper around calibration and the exact engine."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .calibration import calibrate_min_priority, calibrate_perkins
from .engine import exact_stopped_law
from .measures import DiscreteMeasure, tv_distance


def as_measure(X) -> DiscreteMeasure:
    """Accept a measure or an ``(n, 2)`` array of ``(location, mass)`` rows."""
    if isinstance(X, DiscreteMeasure):
        return X
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("expected an (n, 2) array of (location, mass) rows")
    return DiscreteMeasure.from_pairs(map(tuple, arr))


class PerkinsEmbedding(TransformerMixin, BaseEstimator):
    """Fit a barrier rule that carries the start law ``X`` onto the target ``y``.

    Parameters
    ----------
    tol : float
        Total-variation tolerance for the calibrated endpoint law.
    priority : {"max", "min"}
        Which running extremum the barrier keeps small ("min" reflects).

    Attributes
    ----------
    rule_ : Perkins
    certificate_ : StoppedLaw
    residual_tv_ : float
    """

    def __init__(self, tol: float = 1e-10, priority: str = "max"):
        self.tol = tol
        self.priority = priority

    def fit(self, X, y):
        lam, mu = as_measure(X), as_measure(y)
        if self.priority == "max":
            result = calibrate_perkins(lam, mu, self.tol)
        elif self.priority == "min":
            result = calibrate_min_priority(lam, mu, self.tol)
        else:
            raise ValueError("priority must be 'max' or 'min'")
        self.start_ = lam
        self.rule_ = result.rule
        self.certificate_ = result.certificate
        self.residual_tv_ = result.residual_tv
        self.n_iter_ = result.iterations
        return self

    def stopped_law(self, X=None):
        check_is_fitted(self, "rule_")
        lam = self.start_ if X is None else as_measure(X)
        return exact_stopped_law(self.rule_, lam)

    def transform(self, X):
        """Joint stopped law from start ``X`` as rows ``(endpoint, max, min, mass)``."""
        law = self.stopped_law(X)
        return np.array([[a.endpoint, a.max, a.min, a.mass] for a in law.joint])

    def score(self, X, y):
        """Negative total-variation gap between the embedded law and ``y``."""
        return -tv_distance(self.stopped_law(X).endpoint_law(), as_measure(y))
