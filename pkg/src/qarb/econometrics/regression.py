"""Least squares with an exact mode and an epsilon-accurate (QLR) mode."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, RankDeficient, ShapeError


@dataclass(frozen=True)
class RegressionFit:
    beta: np.ndarray
    residuals: np.ndarray
    se: np.ndarray
    design_kappa: float
    sigma2: float
    dof: int
    scale: float = 1.0  # largest singular value of the design, used for balancing
    perturbation: np.ndarray | None = None  # balanced-coordinate offset, None when exact

    @property
    def exact(self) -> bool:
        return self.perturbation is None


@dataclass(frozen=True)
class QlrContract:
    """Promise of a coefficient vector within ``epsilon`` of the exact solution.

    The offset is drawn uniformly from the Euclidean ball of radius
    ``epsilon`` in balanced coordinates (design scaled to unit spectral norm),
    so every fitted value moves by at most ``epsilon``.
    """

    epsilon: float = 0.0
    seed: int | None = 0

    def __post_init__(self):
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ConfigError(f"epsilon must be a finite value >= 0, got {self.epsilon}")


def _design(X, y):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2:
        raise ShapeError(f"design must be 2-D, got {X.ndim} dimensions")
    N, d = X.shape
    if y.shape[0] != N:
        raise ShapeError(f"design has {N} rows but target has {y.shape[0]}")
    if N <= d:
        raise ShapeError(f"need more observations than regressors, got N={N}, d={d}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ShapeError("non-finite values in regression inputs")
    return X, y


def _solve(X, y):
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    tol = max(X.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    if s.size == 0 or s[0] == 0 or s[-1] <= tol:
        raise RankDeficient(f"design is rank deficient (singular values {s})")
    beta = Vt.T @ ((U.T @ y) / s)
    return beta, s, Vt


def _finish(X, y, beta, s, Vt, scale, perturbation):
    N, d = X.shape
    residuals = y - X @ beta
    dof = N - d
    sigma2 = float(residuals @ residuals) / dof
    # (X'X)^-1 = V diag(1/s^2) V'
    diag = np.sum((Vt.T / s) ** 2, axis=1)
    se = np.sqrt(sigma2 * diag)
    return RegressionFit(beta, residuals, se, float(s[0] / s[-1]), sigma2, dof, scale, perturbation)


def ols_fit(X, y) -> RegressionFit:
    """Exact least squares via the thin SVD, homoskedastic standard errors."""
    X, y = _design(X, y)
    beta, s, Vt = _solve(X, y)
    return _finish(X, y, beta, s, Vt, 1.0, None)


def _ball_sample(d: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    return direction * radius * rng.random() ** (1.0 / d)


def qlr_fit(X, y, contract: QlrContract | None = None) -> RegressionFit:
    """Least squares meeting the QLR output contract.

    The design is balanced by its largest singular value, the balanced
    solution is computed exactly and offset by a random vector of norm at most
    ``contract.epsilon``, then mapped back. With ``epsilon == 0`` the result is
    identical to :func:`ols_fit`.
    """
    contract = contract or QlrContract()
    if contract.epsilon == 0:
        return ols_fit(X, y)
    X, y = _design(X, y)
    beta, s, Vt = _solve(X, y)
    scale = float(s[0])
    delta = _ball_sample(X.shape[1], contract.epsilon, np.random.default_rng(contract.seed))
    beta = beta + delta / scale
    return _finish(X, y, beta, s, Vt, scale, delta)
