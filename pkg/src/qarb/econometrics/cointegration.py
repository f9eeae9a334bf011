"""Engle-Granger two-step cointegration test and the QLR error-propagation probe."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DegenerateInput, ShapeError
from .adf import AdfReport, adf_test, difference
from .regression import QlrContract, RegressionFit, ols_fit, qlr_fit


@dataclass(frozen=True)
class CointegrationResult:
    flag: bool
    beta: np.ndarray
    intercept: float | None
    adf: AdfReport
    first_stage: RegressionFit = field(repr=False)
    level: float = 0.05

    def to_dict(self) -> dict:
        return {
            "flag": self.flag,
            "beta": [float(b) for b in self.beta],
            "intercept": self.intercept,
            "level": self.level,
            "adf": self.adf.to_dict(),
        }


def _stage_one_inputs(X, y, add_intercept):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ShapeError(f"price block {X.shape} and target length {y.size} disagree")
    D = np.column_stack([np.ones(y.size), X]) if add_intercept else X
    return X, y, D


def engle_granger(X, y, L: int = 1, contract: QlrContract | None = None, level: float = 0.05,
                  add_intercept: bool = True, include_trend: bool = True) -> CointegrationResult:
    """Regress ``y`` on ``X`` (plus a constant), then ADF-test the residuals.

    The flag is raised when the unit root in the residuals is rejected at
    ``level``.
    """
    X, y, D = _stage_one_inputs(X, y, add_intercept)
    if y.size < L + 20:
        raise ShapeError(f"need at least L + 20 = {L + 20} observations, got {y.size}")
    contract = contract or QlrContract()
    exact = ols_fit(D, y)
    rss_floor = (1e-10 * max(np.linalg.norm(y), 1.0)) ** 2
    if exact.residuals @ exact.residuals <= rss_floor:
        raise DegenerateInput("target is an exact linear combination of the regressors")
    fit = exact if contract.epsilon == 0 else qlr_fit(D, y, contract)
    adf = adf_test(fit.residuals, L, include_trend)
    k = 1 if add_intercept else 0
    return CointegrationResult(
        flag=adf.rejects(level),
        beta=fit.beta[k:].copy(),
        intercept=float(fit.beta[0]) if add_intercept else None,
        adf=adf,
        first_stage=fit,
        level=level,
    )


# -- error propagation --------------------------------------------------------

@dataclass(frozen=True)
class ProbeRun:
    epsilon: float
    replicate: int
    gamma_error: float
    residual_error: float
    difference_error: float

    @property
    def chain_holds(self) -> bool:
        slack = 1e-9 * self.epsilon + 1e-12
        return (self.residual_error <= self.epsilon + slack
                and self.difference_error <= 2 * self.epsilon + 2 * slack)


@dataclass(frozen=True)
class ProbeReport:
    runs: list
    epsilons: np.ndarray
    mean_gamma_error: np.ndarray
    exponent: float
    exponent_ci: tuple
    quadratic_consistent: bool
    linear_consistent: bool
    quadratic_bound_holds: bool
    preferred: str
    lag: int

    @property
    def chain_holds(self) -> bool:
        return all(r.chain_holds for r in self.runs)

    @property
    def converged(self) -> bool:
        return bool(np.isfinite(self.exponent) and np.all(np.isfinite(self.exponent_ci)))

    def to_dict(self) -> dict:
        return {
            "lag": self.lag,
            "epsilons": [float(e) for e in self.epsilons],
            "mean_gamma_error": [float(e) for e in self.mean_gamma_error],
            "exponent": self.exponent,
            "exponent_ci95": list(self.exponent_ci),
            "quadratic_consistent": self.quadratic_consistent,
            "linear_consistent": self.linear_consistent,
            "quadratic_bound_holds": self.quadratic_bound_holds,
            "preferred": self.preferred,
            "chain_holds": self.chain_holds,
        }


def _slope(log_eps, log_err):
    A = np.column_stack([log_eps, np.ones_like(log_eps)])
    return float(np.linalg.lstsq(A, log_err, rcond=None)[0][0])


def error_propagation_probe(X, y, L: int = 1, epsilon_grid=None, replicates: int = 20,
                            seed: int = 0, n_boot: int = 2000,
                            add_intercept: bool = True) -> ProbeReport:
    """Measure how the DF regression's ``gamma`` reacts to an epsilon-accurate first stage.

    For every epsilon and replicate the first stage is refit under a seeded
    :class:`QlrContract`; residual and differenced-residual deviations are
    recorded against the exact fit, and the log-log slope of mean
    ``|gamma - gamma_hat|`` on epsilon is estimated with a stratified
    bootstrap interval.
    """
    if epsilon_grid is None:
        epsilon_grid = np.logspace(-6, -2, 9)
    eps = np.asarray(sorted(set(float(e) for e in epsilon_grid)), dtype=float)
    if np.any(eps < 0):
        raise ConfigError("epsilons must be >= 0")
    positive = eps[eps > 0]
    if positive.size < 2 or positive.max() / positive.min() < 100:
        raise ConfigError("epsilon grid must span at least two decades of positive values")
    if replicates < 2:
        raise ConfigError("need at least 2 replicates for the bootstrap")

    X, y, D = _stage_one_inputs(X, y, add_intercept)
    base = engle_granger(X, y, L, None, add_intercept=add_intercept)
    u0 = base.first_stage.residuals
    du0 = difference(u0)
    g0 = base.adf.gamma_hat

    runs = []
    errors = np.zeros((eps.size, replicates))
    for i, e in enumerate(eps):
        for r in range(replicates):
            if e == 0:
                runs.append(ProbeRun(0.0, r, 0.0, 0.0, 0.0))
                continue
            s = int(np.random.SeedSequence([seed, i, r]).generate_state(1)[0])
            res = engle_granger(X, y, L, QlrContract(e, s), add_intercept=add_intercept)
            u = res.first_stage.residuals
            run = ProbeRun(e, r, abs(res.adf.gamma_hat - g0),
                           float(np.max(np.abs(u - u0))),
                           float(np.max(np.abs(difference(u) - du0))))
            runs.append(run)
            errors[i, r] = run.gamma_error

    mask = eps > 0
    log_eps = np.log(eps[mask])
    pos_err = errors[mask]
    mean_err = errors.mean(axis=1)
    exponent = _slope(log_eps, np.log(pos_err.mean(axis=1)))

    rng = np.random.default_rng(seed)
    boots = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, replicates, size=pos_err.shape)
        boots[b] = _slope(log_eps, np.log(np.take_along_axis(pos_err, idx, axis=1).mean(axis=1)))
    lo, hi = (float(v) for v in np.quantile(boots, [0.025, 0.975]))

    bound = np.sqrt(L + 2) * eps[:, None] ** 2
    return ProbeReport(
        runs=runs,
        epsilons=eps,
        mean_gamma_error=mean_err,
        exponent=exponent,
        exponent_ci=(lo, hi),
        quadratic_consistent=lo <= 2.0 <= hi,
        linear_consistent=lo <= 1.0 <= hi,
        quadratic_bound_holds=bool(np.all(errors <= bound)),
        preferred="quadratic" if abs(exponent - 2.0) < abs(exponent - 1.0) else "linear",
        lag=L,
    )
