"""Price panels: CSV ingestion, synthetic markets and JSON report persistence."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateInput, OrderError, ParseError, ShapeError, VersionError

SCHEMA_VERSION = 1
KINDS = ("random_walk", "planted_cointegration", "controlled_kappa")
KIND_ALIASES = {"planted": "planted_cointegration", "walk": "random_walk", "kappa": "controlled_kappa"}
_EPOCH = datetime(2020, 1, 1)


@dataclass(frozen=True)
class PricePanel:
    prices: np.ndarray  # T x J
    tickers: tuple
    timestamps: tuple  # ISO-8601 strings, strictly increasing
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        p = np.asarray(self.prices, dtype=float)
        if p.ndim != 2:
            raise ShapeError(f"prices must be T x J, got shape {p.shape}")
        T, J = p.shape
        if T == 0 or J == 0:
            raise DegenerateInput("empty price panel")
        if len(self.tickers) != J or len(set(self.tickers)) != J:
            raise ShapeError("need one distinct ticker per column")
        if len(self.timestamps) != T:
            raise ShapeError(f"{len(self.timestamps)} timestamps for {T} rows")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise ShapeError("prices must be finite and strictly positive")
        parsed = [datetime.fromisoformat(t) for t in self.timestamps]
        for i in range(1, T):
            if parsed[i] <= parsed[i - 1]:
                raise OrderError(f"timestamp {self.timestamps[i]} does not follow {self.timestamps[i - 1]}")
        p.setflags(write=False)
        object.__setattr__(self, "prices", p)
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "timestamps", tuple(self.timestamps))

    @property
    def T(self) -> int:
        return self.prices.shape[0]

    @property
    def J(self) -> int:
        return self.prices.shape[1]

    def block(self, indices, window=None) -> np.ndarray:
        """Prices of the given stocks over ``window = (start, stop)`` as a ``T' x d`` array."""
        start, stop = window if window is not None else (0, self.T)
        return np.array(self.prices[start:stop, list(indices)])


# -- CSV ----------------------------------------------------------------------

def _fmt(v: float) -> str:
    return f"{v:.10g}"


def load_csv(path) -> PricePanel:
    """Read ``timestamp,TICKER1,...`` rows; diagnostics carry 1-based file line numbers."""
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        raise DegenerateInput(f"{path} is empty")
    rows = list(csv.reader(io.StringIO(text)))
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0].lower() != "timestamp":
        raise ParseError(1, "header must be 'timestamp,TICKER1,...'")
    tickers = header[1:]
    if len(set(tickers)) != len(tickers) or any(not t for t in tickers):
        raise ParseError(1, "tickers must be distinct and non-empty")
    stamps, values = [], []
    prev = None
    for line, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(line, f"expected {len(header)} fields, got {len(row)}")
        stamp = row[0].strip()
        try:
            when = datetime.fromisoformat(stamp)
        except ValueError:
            raise ParseError(line, f"bad timestamp {stamp!r}") from None
        prices = []
        for cell in row[1:]:
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(line, f"bad price {cell!r}") from None
            if not math.isfinite(v) or v <= 0:
                raise ParseError(line, f"price must be positive, got {cell.strip()!r}")
            prices.append(v)
        if prev is not None and when <= prev:
            raise OrderError(f"line {line}: timestamp {stamp} is not after the previous row")
        prev = when
        stamps.append(stamp)
        values.append(prices)
    if not values:
        raise DegenerateInput(f"{path} has a header but no rows")
    return PricePanel(np.array(values), tuple(tickers), tuple(stamps))


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def save_csv(panel: PricePanel, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["timestamp", *panel.tickers])
    for stamp, row in zip(panel.timestamps, panel.prices):
        w.writerow([stamp, *(_fmt(v) for v in row)])
    _atomic_write(path, buf.getvalue())


# -- synthetic markets --------------------------------------------------------

@dataclass(frozen=True)
class SynthSpec:
    kind: str
    T: int = 500
    J: int = 2
    seed: int = 0
    sigma: float = 0.01  # log-return volatility of the walks
    p0: float = 100.0
    beta: tuple = (2.0,)
    phi: float = 0.5
    sigma_noise: float = 0.05
    kappa: float = 8.0
    singular_values: tuple | None = None

    def __post_init__(self):
        kind = KIND_ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise ConfigError(f"unknown synth kind {self.kind!r}; choose from {KINDS}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "beta", tuple(float(b) for b in np.atleast_1d(self.beta)))
        if self.singular_values is not None:
            object.__setattr__(self, "singular_values", tuple(float(s) for s in self.singular_values))
        if self.T < 50:
            raise ConfigError(f"T must be >= 50, got {self.T}")
        if self.J < 1:
            raise ConfigError("J must be >= 1")
        if not self.sigma > 0 or not self.sigma_noise > 0 or not self.p0 > 0:
            raise ConfigError("sigma, sigma_noise and p0 must be > 0")
        if not abs(self.phi) < 1:
            raise ConfigError(f"need |phi| < 1, got {self.phi}")
        if not self.kappa >= 1:
            raise ConfigError(f"need kappa >= 1, got {self.kappa}")
        if kind == "planted_cointegration" and not self.beta:
            raise ConfigError("planted cointegration needs at least one beta")
        if self.singular_values is not None:
            s = np.array(self.singular_values)
            if len(s) != self.J or np.any(s <= 0):
                raise ConfigError("need J positive singular values")
            if self.J > self.T - 1:
                raise ConfigError("controlled spectra need J < T")

    @property
    def n_stocks(self) -> int:
        return len(self.beta) + 1 if self.kind == "planted_cointegration" else self.J

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def _walks(rng, T, J, sigma, p0):
    steps = sigma * rng.standard_normal((T - 1, J))
    logp = np.vstack([np.zeros((1, J)), np.cumsum(steps, axis=0)])
    return p0 * np.exp(logp)


def _ar1(rng, T, phi, sigma):
    z = sigma * rng.standard_normal(T)
    e = np.empty(T)
    e[0] = z[0] / math.sqrt(1 - phi ** 2)
    for t in range(1, T):
        e[t] = phi * e[t - 1] + z[t]
    return e


def _orthonormal(rng, n, k, center=False):
    G = rng.standard_normal((n, k))
    if center:
        G -= G.mean(axis=0)
    Q, R = np.linalg.qr(G)
    return Q * np.sign(np.diag(R))


def synth(spec: SynthSpec) -> PricePanel:
    """Deterministic synthetic panel for ``spec``.

    ``planted_cointegration`` puts the dependent series first:
    ``y = c + sum_i beta_i x_i + e`` with ``e`` a stationary AR(1) spread and
    ``c`` a shift that only appears when needed to keep ``y`` positive.
    ``controlled_kappa`` returns ``offset + X`` where ``X`` has zero-mean columns
    and exactly the requested singular values.
    """
    rng = np.random.default_rng(spec.seed)
    meta = {"kind": spec.kind, "seed": spec.seed}
    if spec.kind == "random_walk":
        prices = _walks(rng, spec.T, spec.J, spec.sigma, spec.p0)
        tickers = [f"S{j}" for j in range(spec.J)]
    elif spec.kind == "planted_cointegration":
        d = len(spec.beta)
        x = _walks(rng, spec.T, d, spec.sigma, spec.p0)
        spread = _ar1(rng, spec.T, spec.phi, spec.sigma_noise)
        y = x @ np.array(spec.beta) + spread
        shift = 0.0 if y.min() > 0 else spec.p0 - y.min()
        prices = np.column_stack([y + shift, x])
        tickers = ["Y"] + [f"X{i}" for i in range(d)]
        meta.update(beta=list(spec.beta), phi=spec.phi, sigma_noise=spec.sigma_noise, intercept=shift)
    else:
        J = spec.J
        if spec.singular_values is not None:
            s = np.array(spec.singular_values)
        elif J == 1:
            s = np.ones(1)
        else:
            s = spec.kappa ** (-np.arange(J) / (J - 1))
        U = _orthonormal(rng, spec.T, J, center=True)
        V = _orthonormal(rng, J, J)
        X = (U * s) @ V.T
        prices = spec.p0 + float(np.max(s)) + X
        tickers = [f"K{j}" for j in range(J)]
        meta.update(singular_values=sorted(float(v) for v in s), kappa=float(s.max() / s.min()))
    stamps = tuple((_EPOCH + timedelta(seconds=t)).isoformat() for t in range(spec.T))
    meta["spec"] = spec.to_dict()
    return PricePanel(prices, tuple(tickers), stamps, meta)


# -- reports ------------------------------------------------------------------

def dumps_report(report) -> str:
    payload = report.to_dict() if hasattr(report, "to_dict") else dict(report)
    if "seed" not in payload:
        raise ConfigError("reports must carry their seed")
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def save_report(report, path) -> None:
    """Write ``report`` (a mapping or an object with ``to_dict``) as versioned JSON."""
    _atomic_write(path, dumps_report(report))


def load_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise VersionError(f"report schema_version {version!r}, expected {SCHEMA_VERSION}")
    if "seed" not in payload:
        raise VersionError("report has no seed field; written by an incompatible version")
    return payload
