"""scikit-learn style wrappers.

``StabilityCertifier`` is fitted to a system and then scores state samples
with the certificate it found; ``LcsDiscretizer`` turns LCS models into
DLCS models so the two can be chained in a Pipeline.
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .cpa import DEFAULT_EPS, DEFAULT_MAX_ITER, Status, run_cutting_plane
from .io import SystemDocument
from .system import Dlcs, Lcs, discretize


def _as_system(x):
    if isinstance(x, SystemDocument):
        return x.to_system()
    if isinstance(x, dict):
        return SystemDocument.from_dict(x).to_system()
    return x


class LcsDiscretizer(TransformerMixin, BaseEstimator):
    """Theta-scheme discretization as a stateless transformer.

    Accepts one system or a list of systems; DLCS inputs pass through, and so
    do numeric arrays, so state samples reach a downstream ``predict``.
    """

    def __init__(self, dt=0.1, theta=1.0):
        self.dt = dt
        self.theta = theta

    def fit(self, X, y=None):
        return self

    def _one(self, sys_):
        sys_ = _as_system(sys_)
        if isinstance(sys_, Lcs):
            return discretize(sys_, self.dt, self.theta)
        if isinstance(sys_, Dlcs):
            return sys_
        raise TypeError(f"expected Lcs or Dlcs, got {type(sys_).__name__}")

    def transform(self, X):
        if isinstance(X, np.ndarray):
            return X
        if isinstance(X, (list, tuple)):
            return [self._one(s) for s in X]
        return self._one(X)


class StabilityCertifier(BaseEstimator):
    """Search for a CQLF/EQLF certificate of a DLCS.

    After ``fit``: ``status_``, ``certificate_``, ``margin_``, ``n_iter_``
    and the full ``verdict_``.  ``predict`` evaluates the quadratic form on
    rows of ``X`` (states for CQLF, stacked ``(x, lam)`` for EQLF).
    """

    def __init__(self, mode="cqlf", eps=DEFAULT_EPS, max_iter=DEFAULT_MAX_ITER, seed=0,
                 fast_sep=False, dt=None, theta=None):
        self.mode = mode
        self.eps = eps
        self.max_iter = max_iter
        self.seed = seed
        self.fast_sep = fast_sep
        self.dt = dt
        self.theta = theta

    def fit(self, X, y=None):
        sys_ = _as_system(X)
        if isinstance(sys_, Lcs):
            if self.dt is None or self.theta is None:
                raise ValueError("continuous-time input needs dt and theta")
            sys_ = discretize(sys_, self.dt, self.theta)
        if not isinstance(sys_, Dlcs):
            raise TypeError(f"expected Lcs or Dlcs, got {type(sys_).__name__}")
        verdict = run_cutting_plane(
            sys_, self.mode, eps=self.eps, max_iter=self.max_iter, seed=self.seed,
            fast_sep=self.fast_sep,
        )
        self.system_ = sys_
        self.verdict_ = verdict
        self.status_ = verdict.status.value
        self.certificate_ = verdict.certificate
        self.margin_ = verdict.margin
        self.n_iter_ = verdict.iterations
        self.n_features_in_ = verdict.certificate.shape[0]
        return self

    @property
    def is_stable_(self):
        check_is_fitted(self, "verdict_")
        return self.verdict_.status is Status.FEASIBLE

    def predict(self, X):
        check_is_fitted(self, "verdict_")
        X = check_array(X, ensure_min_samples=1)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, certificate expects {self.n_features_in_}")
        return np.einsum("ij,jk,ik->i", X, self.certificate_, X)

    def transform(self, X):
        return self.predict(X)[:, None]
