"""Portfolio screening: condition-number preselection followed by Engle-Granger.

Two strategies are offered. :func:`screen_fixed` runs the full cascade at one
threshold ``kappa0`` and cointegration-tests whatever is not stopped.
:func:`screen_progressive` doubles the threshold round by round, dropping
portfolios whose single comparator call comes back negative, until at most
``k`` remain.

Every portfolio draws randomness from its own stream keyed by
``(seed, portfolio key, round)``, so verdicts do not depend on which other
portfolios share the pool or on thread scheduling.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import PricePanel
from .econometrics import AdfReport, CointegrationResult, QlrContract, engle_granger
from .embedding import build_embedding, center_columns, exact_condition_number
from .errors import ConfigError, DegenerateInput, ShapeError, ValidationError
from .qcnc import MAX_PHASE_BITS, Comparator, round_cost
from .vtpa import VtpaConfig, query_ledger, vtpa, with_true_kappa

COINTEGRATION = "cointegration"
INVALID = "invalid"
PRICE_TRANSFORMS = ("levels", "log", "returns")


# -- pools ----------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class Portfolio:
    stocks: tuple
    window: tuple

    def __post_init__(self):
        object.__setattr__(self, "stocks", tuple(int(s) for s in self.stocks))
        object.__setattr__(self, "window", tuple(int(w) for w in self.window))
        if len(set(self.stocks)) != len(self.stocks) or not self.stocks:
            raise ConfigError(f"portfolio stocks must be distinct and non-empty, got {self.stocks}")
        if len(self.window) != 2 or not 0 <= self.window[0] < self.window[1]:
            raise ConfigError(f"window must be (start, stop) with 0 <= start < stop, got {self.window}")

    @property
    def key(self) -> str:
        return "-".join(map(str, self.stocks)) + f"@{self.window[0]}:{self.window[1]}"

    @classmethod
    def from_key(cls, key: str) -> "Portfolio":
        stocks, window = key.split("@")
        a, b = window.split(":")
        return cls(tuple(int(s) for s in stocks.split("-")), (int(a), int(b)))

    def to_dict(self) -> dict:
        return {"stocks": list(self.stocks), "window": list(self.window)}


@dataclass(frozen=True)
class PortfolioPool:
    portfolios: tuple
    d: int
    n_stocks: int
    T: int
    source: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "portfolios", tuple(self.portfolios))
        seen = set()
        for p in self.portfolios:
            if len(p.stocks) != self.d:
                raise ShapeError(f"portfolio {p.key} has {len(p.stocks)} stocks, pool expects {self.d}")
            if max(p.stocks) >= self.n_stocks or min(p.stocks) < 0:
                raise ShapeError(f"portfolio {p.key} references a stock outside [0, {self.n_stocks})")
            if p.window[1] > self.T:
                raise ShapeError(f"portfolio {p.key} window exceeds T={self.T}")
            ident = (frozenset(p.stocks), p.window)
            if ident in seen:
                raise ConfigError(f"duplicate portfolio {p.key}")
            seen.add(ident)

    def __len__(self) -> int:
        return len(self.portfolios)

    def without(self, portfolio: Portfolio) -> "PortfolioPool":
        return PortfolioPool(tuple(p for p in self.portfolios if p != portfolio),
                             self.d, self.n_stocks, self.T, self.source)

    def to_dict(self) -> dict:
        return {"d": self.d, "n_stocks": self.n_stocks, "T": self.T, "source": self.source,
                "portfolios": [p.to_dict() for p in self.portfolios]}

    @classmethod
    def from_dict(cls, d: dict) -> "PortfolioPool":
        ports = tuple(Portfolio(tuple(p["stocks"]), tuple(p["window"])) for p in d["portfolios"])
        return cls(ports, int(d["d"]), int(d["n_stocks"]), int(d["T"]), d.get("source"))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "PortfolioPool":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def exhaustive_pool(n_stocks: int, d: int, T: int, window=None, cap: int = 100_000,
                    source: str | None = None) -> PortfolioPool:
    """Every ``d``-subset of ``n_stocks`` over one window; refuses pools larger than ``cap``."""
    if not 1 <= d <= n_stocks:
        raise ConfigError(f"need 1 <= d <= n_stocks, got d={d}, n_stocks={n_stocks}")
    count = math.comb(n_stocks, d)
    if count > cap:
        raise ConfigError(f"C({n_stocks}, {d}) = {count} portfolios exceeds cap {cap}")
    window = tuple(window) if window is not None else (0, T)
    ports = tuple(Portfolio(c, window) for c in itertools.combinations(range(n_stocks), d))
    return PortfolioPool(ports, d, n_stocks, T, source)


# -- configuration and report -----------------------------------------------------

@dataclass(frozen=True)
class ScreenConfig:
    """Knobs shared by both screening strategies."""

    epsilon: float = 0.01
    boost: float = 3.0  # amplifies each stage so early-stage misses do not compound
    extra_bits: int = 2
    pe_repeats: int | None = None
    input_mode: str = "uniform"
    lag: int = 1
    level: float = 0.05
    qlr_epsilon: float = 0.0
    price_transform: str = "levels"  # what the preselection embeds: levels, log or returns

    def __post_init__(self):
        if self.price_transform not in PRICE_TRANSFORMS:
            raise ConfigError(f"price_transform must be one of {PRICE_TRANSFORMS}")

    def vtpa_config(self, kappa0: float) -> VtpaConfig:
        return VtpaConfig(kappa0, self.epsilon, self.boost, self.extra_bits, self.pe_repeats)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ScreeningReport:
    strategy: str
    seed: int
    config: dict
    survivors: list  # (Portfolio, CointegrationResult) in portfolio order
    rejected_at: dict  # portfolio key -> stage index, "cointegration" or "invalid"
    total_queries: float
    spent_queries: float
    preselected: list = field(default_factory=list)  # keys passed to cointegration
    rounds: int = 0
    budget_unmet: bool = False
    notes: dict = field(default_factory=dict)  # portfolio key -> diagnostic text
    wall_stats: dict | None = None

    @property
    def survivor_keys(self) -> list:
        return [p.key for p, _ in self.survivors]

    def to_dict(self) -> dict:
        out = {
            "strategy": self.strategy,
            "seed": self.seed,
            "config": self.config,
            "survivors": [{"portfolio": p.key, **r.to_dict()} for p, r in self.survivors],
            "rejected_at": dict(sorted(self.rejected_at.items())),
            "queries": {"total": self.total_queries, "spent": self.spent_queries},
            "preselected": list(self.preselected),
            "rounds": self.rounds,
            "budget_unmet": self.budget_unmet,
            "notes": dict(sorted(self.notes.items())),
        }
        if self.wall_stats is not None:
            out["wall_stats"] = self.wall_stats
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ScreeningReport":
        survivors = []
        for s in d["survivors"]:
            adf = AdfReport.from_dict(s["adf"])
            res = CointegrationResult(s["flag"], np.array(s["beta"], dtype=float), s["intercept"],
                                      adf, None, s["level"])
            survivors.append((Portfolio.from_key(s["portfolio"]), res))
        return cls(
            strategy=d["strategy"], seed=d["seed"], config=d["config"], survivors=survivors,
            rejected_at=dict(d["rejected_at"]), total_queries=d["queries"]["total"],
            spent_queries=d["queries"]["spent"], preselected=list(d["preselected"]),
            rounds=d["rounds"], budget_unmet=d["budget_unmet"], notes=dict(d["notes"]),
            wall_stats=d.get("wall_stats"),
        )


# -- per-portfolio work -------------------------------------------------------------

def portfolio_seed(seed: int, portfolio: Portfolio, round_: int) -> np.random.SeedSequence:
    digest = hashlib.sha256(portfolio.key.encode()).digest()
    return np.random.SeedSequence([int(seed), int.from_bytes(digest[:8], "little"), int(round_)])


def preselection_block(panel: PricePanel, p: Portfolio, transform: str = "levels") -> np.ndarray:
    """Mean-centered matrix the comparator embeds for portfolio ``p``."""
    block = panel.block(p.stocks, p.window)
    if transform == "log":
        block = np.log(block)
    elif transform == "returns":
        block = np.diff(np.log(block), axis=0)
    return center_columns(block)


def _comparator(panel: PricePanel, p: Portfolio, cfg: ScreenConfig) -> Comparator:
    block = preselection_block(panel, p, cfg.price_transform)
    return Comparator(build_embedding(block, "spectral"), cfg.input_mode)


def _cointegrate(panel: PricePanel, p: Portfolio, cfg: ScreenConfig, seed: int):
    prices = panel.block(p.stocks, p.window)
    contract = QlrContract(cfg.qlr_epsilon, int(portfolio_seed(seed, p, 0).generate_state(1)[0]))
    return engle_granger(prices[:, 1:], prices[:, 0], cfg.lag, contract, cfg.level)


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _check_panel(pool: PortfolioPool, panel: PricePanel):
    if not len(pool):
        raise DegenerateInput("portfolio pool is empty")
    if panel.J < pool.n_stocks or panel.T < pool.T:
        raise ShapeError(f"panel {panel.T}x{panel.J} too small for pool over {pool.n_stocks} stocks, T={pool.T}")


def _cointegration_stage(panel, pool_items, cfg, seed, threads, report):
    def work(p):
        try:
            return p, _cointegrate(panel, p, cfg, seed), None
        except ValidationError as exc:
            return p, None, str(exc)

    for p, res, err in _map(work, pool_items, threads):
        if err is not None:
            report.rejected_at[p.key] = INVALID
            report.notes[p.key] = err
        elif res.flag:
            report.survivors.append((p, res))
        else:
            report.rejected_at[p.key] = COINTEGRATION


def screen_fixed(pool: PortfolioPool, panel: PricePanel, kappa0: float, cfg: ScreenConfig | None = None,
                 rng_seed: int = 0, threads: int = 1, timing: bool = False) -> ScreeningReport:
    """Cascade preselection at ``kappa0``; portfolios the cascade does not stop are cointegration-tested."""
    cfg = cfg or ScreenConfig()
    _check_panel(pool, panel)
    vcfg = cfg.vtpa_config(kappa0)
    t0 = time.perf_counter()

    def work(p):
        try:
            comp = _comparator(panel, p, cfg)
        except ValidationError as exc:
            return p, None, str(exc)
        rng = np.random.default_rng(portfolio_seed(rng_seed, p, 1))
        return p, vtpa(comp.emb, cfg.input_mode, vcfg, rng, comparator=comp), None

    report = ScreeningReport("fixed", int(rng_seed), {"kappa0": kappa0, **cfg.to_dict()},
                             [], {}, 0.0, 0.0, rounds=vcfg.M)
    passed = []
    for p, out, err in _map(work, list(pool.portfolios), threads):
        if err is not None:
            report.rejected_at[p.key] = INVALID
            report.notes[p.key] = err
            continue
        report.total_queries += out.total_queries
        report.spent_queries += out.spent_queries
        if out.stopped:
            report.rejected_at[p.key] = out.ones + 1
        else:
            passed.append(p)
    t1 = time.perf_counter()
    report.preselected = [p.key for p in passed]
    _cointegration_stage(panel, passed, cfg, rng_seed, threads, report)
    if timing:
        report.wall_stats = {"preselection_s": t1 - t0, "cointegration_s": time.perf_counter() - t1}
    return report


def screen_progressive(pool: PortfolioPool, panel: PricePanel, k: int, J_max: int = 30,
                       cfg: ScreenConfig | None = None, rng_seed: int = 0, threads: int = 1,
                       timing: bool = False) -> ScreeningReport:
    """Doubling-threshold preselection until at most ``k`` portfolios remain.

    Round ``j`` re-tests each remaining portfolio once at ``kappa_j = 2**j``
    with fresh randomness. Rounds stop when ``K <= k`` or after ``J_max``
    (further capped by the simulator's phase-bit limit); hitting the cap with
    ``K > k`` sets ``budget_unmet``.
    """
    cfg = cfg or ScreenConfig()
    if k < 0:
        raise ConfigError(f"survivor budget k must be >= 0, got {k}")
    if J_max < 1:
        raise ConfigError("J_max must be >= 1")
    _check_panel(pool, panel)
    j_cap = min(J_max, MAX_PHASE_BITS - cfg.extra_bits)
    t0 = time.perf_counter()
    report = ScreeningReport("progressive", int(rng_seed),
                             {"k": k, "J_max": J_max, "J_effective": j_cap, **cfg.to_dict()}, [], {}, 0.0, 0.0)

    remaining, comparators = [], {}
    for p in pool.portfolios:
        try:
            comparators[p] = _comparator(panel, p, cfg)
            remaining.append(p)
        except ValidationError as exc:
            report.rejected_at[p.key] = INVALID
            report.notes[p.key] = str(exc)

    j = 1
    while len(remaining) > k and j <= j_cap:
        stage_cfg = cfg.vtpa_config(2.0 ** j).stage_config(j)

        def work(p, stage_cfg=stage_cfg, j=j):
            rng = np.random.default_rng(portfolio_seed(rng_seed, p, j))
            return p, comparators[p].run(stage_cfg, rng)

        kept = []
        for p, out in _map(work, remaining, threads):
            d = comparators[p].emb.n_cols
            report.total_queries += stage_cfg.repetitions * round_cost(stage_cfg.kappa0, stage_cfg.epsilon, d)
            report.spent_queries += out.queries
            if out.flag:
                kept.append(p)
            else:
                report.rejected_at[p.key] = j
        remaining = kept
        report.rounds = j
        j += 1
    report.budget_unmet = len(remaining) > k
    t1 = time.perf_counter()
    report.preselected = [p.key for p in remaining]
    _cointegration_stage(panel, remaining, cfg, rng_seed, threads, report)
    if timing:
        report.wall_stats = {"preselection_s": t1 - t0, "cointegration_s": time.perf_counter() - t1}
    return report


# -- scaling experiment ------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleSpec:
    """Random matrices with log-uniform condition numbers.

    ``spectrum="uniform"`` spreads interior singular values uniformly on
    ``[1/kappa, 1]``; ``"clustered"`` puts every singular value but the largest
    at ``1/kappa``.
    """

    n_rows: int = 8
    d: int = 4
    kappa_range: tuple = (1.5, 128.0)
    trials: int = 200
    seed: int = 0
    spectrum: str = "uniform"
    epsilon: float = 0.1
    boost: float = 1.0

    def __post_init__(self):
        lo, hi = self.kappa_range
        if not 1 <= lo < hi:
            raise ConfigError(f"kappa_range must satisfy 1 <= lo < hi, got {self.kappa_range}")
        if self.n_rows < self.d or self.d < 1:
            raise ConfigError("need n_rows >= d >= 1")
        if self.spectrum not in ("uniform", "clustered"):
            raise ConfigError(f"unknown spectrum {self.spectrum!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")


def _random_orthonormal(rng, n, k):
    Q, R = np.linalg.qr(rng.standard_normal((n, k)))
    return Q * np.sign(np.diag(R))


def ensemble_matrices(spec: EnsembleSpec, d: int | None = None):
    """Yield ``(X, kappa)`` with ``sigma_max = 1`` and ``sigma_min = 1/kappa``."""
    d = spec.d if d is None else d
    rng = np.random.default_rng(spec.seed)
    lo, hi = np.log(spec.kappa_range[0]), np.log(spec.kappa_range[1])
    n_rows = max(spec.n_rows, d)
    for _ in range(spec.trials):
        kappa = float(np.exp(rng.uniform(lo, hi)))
        if d == 1:
            s = np.ones(1)
            kappa = 1.0
        elif spec.spectrum == "clustered":
            s = np.r_[1.0, np.full(d - 1, 1.0 / kappa)]
        else:
            s = np.r_[1.0, rng.uniform(1.0 / kappa, 1.0, d - 2), 1.0 / kappa]
        X = (_random_orthonormal(rng, n_rows, d) * s) @ _random_orthonormal(rng, d, d).T
        yield X, kappa


def run_ensemble(spec: EnsembleSpec, kappa0: float, d: int | None = None, input_mode: str = "uniform"):
    """VTPA outcomes (with oracle kappa attached) over the ensemble at one threshold."""
    vcfg = VtpaConfig(kappa0, spec.epsilon, spec.boost)
    outcomes = []
    for i, (X, _) in enumerate(ensemble_matrices(spec, d)):
        true_kappa = exact_condition_number(X).kappa
        emb = build_embedding(X)
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, int(kappa0 * 1000), i]))
        out = vtpa(emb, input_mode, vcfg, rng)
        outcomes.append(with_true_kappa(out, true_kappa))
    return outcomes


def complexity_experiment(spec: EnsembleSpec, kappa0_grid=(4, 8, 16, 32), d_grid=None,
                          d_kappa0: float = 16.0) -> dict:
    """Query tables and fitted exponents of average cascade cost.

    The slope of ``log T_avg`` on ``log kappa0`` is the headline number; when
    ``d_grid`` is given the same ensemble is rerun at ``d_kappa0`` for each
    column count and costs are compared against ``sqrt(d)``.
    """
    grid = sorted(float(k) for k in kappa0_grid)
    if not grid:
        raise ConfigError("kappa0 grid is empty")
    outcomes = {k: run_ensemble(spec, k) for k in grid}
    ledger = query_ledger(outcomes)
    report = {
        "ensemble": asdict(spec),
        "kappa0_grid": grid,
        "T_avg": [ledger["per_kappa0"][k]["T_avg"] for k in grid],
        "spent_avg": [ledger["per_kappa0"][k]["spent_avg"] for k in grid],
        "envelope": [ledger["per_kappa0"][k]["envelope"] for k in grid],
        "bands": {str(k): {str(j): b for j, b in ledger["per_kappa0"][k]["bands"].items()} for k in grid},
        "slope": ledger["slope"],
        "intercept": ledger["intercept"],
    }
    if d_grid:
        ds = sorted(int(d) for d in d_grid)
        costs = [query_ledger(run_ensemble(spec, d_kappa0, d))["per_kappa0"][float(d_kappa0)]["T_avg"]
                 for d in ds]
        ratio = [c / costs[0] for c in costs]
        sqrt_ratio = [math.sqrt(d / ds[0]) for d in ds]
        report["d_scaling"] = {
            "kappa0": d_kappa0,
            "d_grid": ds,
            "T_avg": costs,
            "cost_ratio": ratio,
            "sqrt_d_ratio": sqrt_ratio,
            "max_relative_deviation": max(abs(r / s - 1) for r, s in zip(ratio, sqrt_ratio)),
        }
    return report
