"""Differencing and the augmented Dickey-Fuller unit-root test."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DegenerateInput, ShapeError
from .critical import LEVELS, df_critical_values
from .regression import RegressionFit, ols_fit


def difference(u) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size < 2:
        raise ShapeError(f"need at least 2 observations to difference, got {u.size}")
    return np.diff(u)


@dataclass(frozen=True)
class AdfReport:
    gamma_hat: float
    se_gamma: float
    df_tau: float
    lag: int
    alpha_hat: float
    beta_trend_hat: float | None
    critical_values: dict
    reject_unit_root: dict
    effective_n: int
    include_trend: bool
    fit: RegressionFit | None = field(default=None, repr=False, compare=False)

    def rejects(self, level: float = 0.05) -> bool:
        try:
            return self.reject_unit_root[float(level)]
        except KeyError:
            raise ConfigError(f"level {level} not evaluated; have {sorted(self.reject_unit_root)}") from None

    def to_dict(self) -> dict:
        return {
            "gamma_hat": self.gamma_hat,
            "se_gamma": self.se_gamma,
            "df_tau": self.df_tau,
            "lag": self.lag,
            "alpha_hat": self.alpha_hat,
            "beta_trend_hat": self.beta_trend_hat,
            "critical_values": {str(k): v for k, v in self.critical_values.items()},
            "reject_unit_root": {str(k): v for k, v in self.reject_unit_root.items()},
            "effective_n": self.effective_n,
            "include_trend": self.include_trend,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AdfReport":
        return cls(
            gamma_hat=d["gamma_hat"], se_gamma=d["se_gamma"], df_tau=d["df_tau"], lag=d["lag"],
            alpha_hat=d["alpha_hat"], beta_trend_hat=d["beta_trend_hat"],
            critical_values={float(k): v for k, v in d["critical_values"].items()},
            reject_unit_root={float(k): v for k, v in d["reject_unit_root"].items()},
            effective_n=d["effective_n"], include_trend=d["include_trend"],
        )


def adf_design(u, L: int, include_trend: bool):
    """Regressand and design of ``du_t = a (+ b t) + g u_{t-1} + sum_i d_i du_{t-i}``.

    Columns are ordered constant, trend (optional), ``u_{t-1}``, then lags
    ``1..L``. Returns ``(y, Z, gamma_column)``.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    du = np.diff(u)
    N = u.size
    y = du[L:]
    cols = [np.ones(N - 1 - L)]
    if include_trend:
        cols.append(np.arange(L + 1, N, dtype=float))
    g = len(cols)
    cols.append(u[L:N - 1])
    for i in range(1, L + 1):
        cols.append(du[L - i:N - 1 - i])
    return y, np.column_stack(cols), g


def adf_test(u, L: int = 1, include_trend: bool = True, levels=LEVELS, table=None) -> AdfReport:
    """ADF regression by OLS and the left-tailed test of ``gamma = 0``.

    ``L`` counts the lagged differences, so with a trend the design has
    ``L + 3`` columns and ``len(u) - 1 - L`` rows. A perfect fit with negative
    ``gamma`` gives ``df_tau = -inf``.
    """
    if int(L) != L or L < 0:
        raise ConfigError(f"lag length must be a non-negative integer, got {L}")
    L = int(L)
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size < L + 10:
        raise ShapeError(f"need at least L + 10 = {L + 10} observations, got {u.size}")
    if not np.all(np.isfinite(u)):
        raise ShapeError("series contains non-finite values")
    if np.ptp(u) == 0:
        raise DegenerateInput("series is constant")
    y, Z, g = adf_design(u, L, include_trend)
    fit = ols_fit(Z, y)
    gamma, se = float(fit.beta[g]), float(fit.se[g])
    if se > 0:
        tau = gamma / se
    elif gamma < 0:
        tau = -np.inf
    elif gamma > 0:
        tau = np.inf
    else:
        raise DegenerateInput("ADF regression is an exact fit with gamma = 0")
    n = y.size
    cv = df_critical_values(n, include_trend, levels, table)
    return AdfReport(
        gamma_hat=gamma, se_gamma=se, df_tau=float(tau), lag=L,
        alpha_hat=float(fit.beta[0]),
        beta_trend_hat=float(fit.beta[1]) if include_trend else None,
        critical_values=cv,
        reject_unit_root={q: bool(tau < c) for q, c in cv.items()},
        effective_n=n, include_trend=include_trend, fit=fit,
    )
