"""Monte-Carlo Dickey-Fuller critical values and the packaged lookup table.

The table is produced by :func:`calibrate` and shipped as
``qarb/data/df_critical_values.json``. Lookups interpolate linearly in
``1/n`` between grid points and clamp beyond the largest grid size.
"""
from __future__ import annotations

import json
import os
import tempfile
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import ConfigError, VersionError

LEVELS = (0.01, 0.05, 0.10)
DEFAULT_GRID = (8, 10, 15, 20, 25, 30, 40, 50, 75, 100, 150, 250, 500, 1000, 2500)
DEFAULT_TRIALS = 100_000
DEFAULT_SEED = 20240601
TABLE_VERSION = 1
_CHUNK_CELLS = 4_000_000


def _deterministics(n: int, include_trend: bool) -> np.ndarray:
    cols = [np.ones(n)]
    if include_trend:
        cols.append(np.arange(1, n + 1, dtype=float))
    return np.column_stack(cols)


def simulate_df_tau(n: int, trials: int, include_trend: bool, rng) -> np.ndarray:
    """DF_tau statistics of ``trials`` driftless Gaussian random walks.

    Each walk yields ``n`` regression observations
    ``du_t = a (+ b t) + g u_{t-1} + e_t``. Deterministic terms are partialled
    out in one batched projection, which gives the same t-ratio as the full
    regression.
    """
    rng = np.random.default_rng(rng)
    Z = _deterministics(n, include_trend)
    Q, _ = np.linalg.qr(Z)
    dof = n - Z.shape[1] - 1
    out = np.empty(trials)
    step = max(1, _CHUNK_CELLS // (n + 1))
    for start in range(0, trials, step):
        m = min(step, trials - start)
        e = rng.standard_normal((m, n))
        u = np.cumsum(e, axis=1)
        lagged = np.concatenate([np.zeros((m, 1)), u[:, :-1]], axis=1)
        x = lagged - (lagged @ Q) @ Q.T
        y = e - (e @ Q) @ Q.T
        sxx = np.einsum("ij,ij->i", x, x)
        gamma = np.einsum("ij,ij->i", x, y) / sxx
        resid = y - gamma[:, None] * x
        s2 = np.einsum("ij,ij->i", resid, resid) / dof
        out[start:start + m] = gamma / np.sqrt(s2 / sxx)
    return out


def _key(include_trend: bool) -> str:
    return "ct" if include_trend else "c"


def calibrate(n_grid=DEFAULT_GRID, trials: int = DEFAULT_TRIALS, seed: int = DEFAULT_SEED,
              trends=(False, True), levels=LEVELS) -> dict:
    """Generate a critical-value table as a JSON-ready dictionary."""
    n_grid = sorted({int(n) for n in n_grid})
    if not n_grid or n_grid[0] < 5:
        raise ConfigError("grid sizes must be >= 5")
    if trials < 100:
        raise ConfigError("need at least 100 trials")
    levels = [float(q) for q in levels]
    if any(not 0 < q < 1 for q in levels):
        raise ConfigError("levels must lie in (0, 1)")
    seeds = np.random.SeedSequence(seed).spawn(len(trends) * len(n_grid))
    values = {}
    it = iter(seeds)
    for trend in trends:
        table = {}
        for n in n_grid:
            taus = simulate_df_tau(n, trials, trend, next(it))
            table[str(n)] = [float(v) for v in np.quantile(taus, levels)]
        values[_key(trend)] = table
    return {
        "version": TABLE_VERSION,
        "generator": "driftless Gaussian random walk, DF_tau by OLS with homoskedastic SE",
        "trials": int(trials),
        "seed": int(seed),
        "levels": levels,
        "n_grid": n_grid,
        "values": values,
    }


def write_table(table: dict, path) -> None:
    """Write atomically so concurrent readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(table, fh, indent=1, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def read_table(path) -> dict:
    with open(path) as fh:
        table = json.load(fh)
    if table.get("version") != TABLE_VERSION:
        raise VersionError(f"critical-value table version {table.get('version')!r} unsupported")
    return table


@lru_cache(maxsize=1)
def packaged_table() -> dict:
    ref = resources.files("qarb") / "data" / "df_critical_values.json"
    with resources.as_file(ref) as p:
        return read_table(p)


def df_critical_values(effective_n: int, include_trend: bool = True, levels=LEVELS,
                       table: dict | None = None) -> dict:
    """Critical values of DF_tau for ``effective_n`` regression observations."""
    table = table or packaged_table()
    key = _key(include_trend)
    if key not in table["values"]:
        raise ConfigError(f"table has no {'trend' if include_trend else 'constant-only'} case")
    grid = np.array(sorted(int(n) for n in table["values"][key]))
    if effective_n < grid[0]:
        raise ConfigError(f"effective_n={effective_n} below the smallest tabulated size {grid[0]}")
    known = [float(q) for q in table["levels"]]
    rows = np.array([table["values"][key][str(n)] for n in grid])
    out = {}
    for q in levels:
        matches = [i for i, k in enumerate(known) if abs(k - float(q)) < 1e-12]
        if not matches:
            raise ConfigError(f"unsupported level {q}; table has {known}")
        col = rows[:, matches[0]]
        # np.interp wants increasing abscissae; 1/n decreases along the grid
        out[float(q)] = float(np.interp(1.0 / effective_n, 1.0 / grid[::-1], col[::-1]))
    return out
