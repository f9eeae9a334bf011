"""Quantum condition number comparator.

Decides whether ``kappa(A) >= kappa0`` by sampling eigenvalues of the embedding
through phase estimation of ``U = exp(i pi A)`` and testing each sampled
magnitude against ``1 / kappa0``.

Each round prepares the input afresh (one oracle call), runs phase estimation
``pe_repeats`` times coherently on the same eigencomponent and keeps the median
magnitude. Sampling uses the exact Born weights and the exact readout
distribution; no gates are simulated unless ``engine="statevector"``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .embedding import HermitianEmbedding
from .errors import ConfigError, NullSpectrumAnomaly, ShapeError
from .qsim import StateVector, hamiltonian_unitary, make_state, phase_estimation, phase_kernel

NULL_TOL = 1e-12
NULL_WEIGHT_TOL = 1e-9
MAX_PHASE_BITS = 20  # readout tables hold 2**b bins per eigenvalue
INPUT_MODES = ("uniform", "data")

InputLike = Union[StateVector, str]


# -- cost model ---------------------------------------------------------------

def simulation_factor(d: int, kappa: float, epsilon: float) -> float:
    """Queries to simulate ``exp(iA)`` once: ``sqrt(d) (1 + log2(kappa/eps))``."""
    return math.sqrt(d) * (1.0 + math.log2(kappa / epsilon))


def qcnc_cost(kappa: float, epsilon: float, d: int) -> float:
    """Worst-case queries of one comparator call at threshold ``kappa``.

    ``kappa^2 log2(1/eps) sqrt(d) (1 + log2(kappa/eps))``: ``2 kappa`` rounds,
    each ``kappa log2(1/eps) / 2`` applications of the simulated unitary.
    """
    return kappa ** 2 * math.log2(1.0 / epsilon) * simulation_factor(d, kappa, epsilon)


def round_cost(kappa: float, epsilon: float, d: int) -> float:
    return qcnc_cost(kappa, epsilon, d) / (2.0 * kappa)


# -- configuration and results ------------------------------------------------

@dataclass(frozen=True)
class CncConfig:
    kappa0: float
    epsilon: float = 0.01
    repetitions: int | None = None
    phase_bits: int | None = None
    pe_repeats: int | None = None

    def __post_init__(self):
        if not self.kappa0 > 1:
            raise ConfigError(f"kappa0 must exceed 1, got {self.kappa0}")
        if not 0 < self.epsilon < 1:
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        min_bits = math.ceil(math.log2(self.kappa0)) + 1
        if self.repetitions is None:
            object.__setattr__(self, "repetitions", math.ceil(2 * self.kappa0))
        if self.phase_bits is None:
            object.__setattr__(self, "phase_bits", min_bits + 1)
        if self.pe_repeats is None:
            object.__setattr__(self, "pe_repeats", 2 * math.ceil(math.log2(1 / self.epsilon)) + 1)
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")
        if self.phase_bits < min_bits:
            raise ConfigError(f"phase_bits must be >= {min_bits} to resolve 1/kappa0")
        if self.phase_bits > MAX_PHASE_BITS:
            raise ConfigError(f"phase_bits={self.phase_bits} exceeds the simulator cap {MAX_PHASE_BITS}")
        if self.pe_repeats < 1:
            raise ConfigError("pe_repeats must be at least 1")

    @property
    def threshold(self) -> float:
        return 1.0 / self.kappa0

    @property
    def resolution(self) -> float:
        return 2.0 ** -self.phase_bits


@dataclass(frozen=True)
class CncOutcome:
    flag: bool
    sampled_eigenvalue: float
    repetitions_used: int
    queries: float
    worst_case_queries: float


# -- Born spectrum ------------------------------------------------------------

@dataclass(frozen=True)
class BornSpectrum:
    """Distinct signed eigenvalues of the embedding and the input's weight on each."""

    eigenvalues: np.ndarray
    weights: np.ndarray

    @property
    def null_weight(self) -> float:
        return float(self.weights[np.abs(self.eigenvalues) < NULL_TOL].sum())

    def mass_below(self, threshold: float) -> float:
        return float(self.weights[np.abs(self.eigenvalues) < threshold].sum())


def _group(eigenvalues, weights, decimals=12) -> BornSpectrum:
    keys = np.round(eigenvalues, decimals) + 0.0
    uniq, inv = np.unique(keys, return_inverse=True)
    w = np.bincount(inv, weights=weights, minlength=uniq.size)
    keep = w > 1e-15
    return BornSpectrum(uniq[keep], w[keep] / w.sum())


def _state_blocks(emb: HermitianEmbedding, state: StateVector) -> np.ndarray:
    size = emb.dim
    if state.dim % size:
        raise ShapeError(f"input of dimension {state.dim} does not factor over embedding dimension {size}")
    return np.asarray(state.amplitudes).reshape(size, -1)


def born_spectrum(emb: HermitianEmbedding, input: InputLike = "uniform", route: str = "svd") -> BornSpectrum:
    """Eigenvalues of ``emb`` with the Born weights of ``input``.

    ``input`` is a :class:`StateVector` over the embedding register (optionally
    followed by a reference register) or one of ``"uniform"`` / ``"data"``,
    which resolve analytically to :func:`uniform_column_state` and
    :func:`encode_data_state` weights. ``route="dense"`` diagonalizes the
    padded matrix instead of using the block SVD.
    """
    N, d = emb.n_rows, emb.n_cols
    if isinstance(input, str):
        if input not in INPUT_MODES:
            raise ConfigError(f"unknown input mode {input!r}")
        sv = np.linalg.svd(emb.block, compute_uv=False)
        w = np.full(d, 1.0 / d) if input == "uniform" else sv ** 2 / np.sum(sv ** 2)
        return _group(np.concatenate([sv, -sv]), np.concatenate([w, w]) / 2.0)
    psi = _state_blocks(emb, input)
    if route == "dense":
        evals, evecs = np.linalg.eigh(emb.matrix)
        amps = evecs.T @ psi
        return _group(evals, np.sum(np.abs(amps) ** 2, axis=1))
    if route != "svd":
        raise ConfigError(f"unknown route {route!r}")
    U, sv, Vt = np.linalg.svd(emb.block, full_matrices=False)
    a = U.T @ psi[:N]
    b = Vt @ psi[N:N + d]
    plus = np.sum(np.abs(a + b) ** 2, axis=1) / 2.0
    minus = np.sum(np.abs(a - b) ** 2, axis=1) / 2.0
    null = max(0.0, 1.0 - plus.sum() - minus.sum())
    return _group(np.concatenate([sv, -sv, [0.0]]), np.concatenate([plus, minus, [null]]))


def eigenphase(eigenvalues) -> np.ndarray:
    """Phase in turns of ``exp(i pi lambda)``: ``lambda/2`` wrapped to [0, 1)."""
    return np.mod(np.asarray(eigenvalues, dtype=float) / 2.0, 1.0)


def readout_magnitudes(b: int) -> np.ndarray:
    """Eigenvalue magnitude reported for each readout ``k``, folded over the sign."""
    N = 2 ** b
    k = np.arange(N)
    return 2.0 * np.minimum(k, N - k) / N


def readout_table(emb: HermitianEmbedding, spectrum: BornSpectrum, b: int, engine: str = "kernel") -> np.ndarray:
    """Rows: readout distribution for each eigenvalue in ``spectrum``."""
    if engine == "kernel":
        return phase_kernel(eigenphase(spectrum.eigenvalues), b)
    if engine != "statevector":
        raise ConfigError(f"unknown engine {engine!r}")
    U = hamiltonian_unitary(emb.matrix, np.pi)
    evals, evecs = np.linalg.eigh(emb.matrix)
    rows = []
    for lam in spectrum.eigenvalues:
        idx = np.flatnonzero(np.abs(evals - lam) < 1e-9)
        rows.append(phase_estimation(U, make_state(evecs[:, idx[0]]), b))
    return np.array(rows)


def _median_below_probability(p_below: np.ndarray, repeats: int) -> np.ndarray:
    """P(lower median of ``repeats`` readouts is below the threshold)."""
    need = (repeats - 1) // 2 + 1
    k = np.arange(need, repeats + 1)
    comb = np.array([math.comb(repeats, int(i)) for i in k], dtype=float)
    p = np.clip(p_below, 0.0, 1.0)[:, None]
    return np.sum(comb * p ** k * (1.0 - p) ** (repeats - k), axis=1)


def _check_embedding(emb: HermitianEmbedding) -> None:
    if emb.norm > 1.0 + 1e-9:
        raise ConfigError(
            f"embedding norm {emb.norm:.4f} exceeds 1; phase estimation of exp(i pi A) would alias"
        )


class Comparator:
    """Precomputed sampling tables for repeated comparator calls on one input."""

    def __init__(self, emb: HermitianEmbedding, input: InputLike = "uniform", engine: str = "kernel"):
        _check_embedding(emb)
        self.emb = emb
        self.spectrum = born_spectrum(emb, input)
        if self.spectrum.null_weight > NULL_WEIGHT_TOL:
            raise NullSpectrumAnomaly(
                f"input places weight {self.spectrum.null_weight:.3e} on the embedding's null space"
            )
        self.engine = engine
        self._weight_cdf = np.cumsum(self.spectrum.weights)
        self._tables: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def _table(self, b: int):
        if b not in self._tables:
            rows = readout_table(self.emb, self.spectrum, b, self.engine)
            cdf = np.cumsum(rows, axis=1)
            cdf /= cdf[:, -1:]
            self._tables[b] = (rows, cdf)
        return self._tables[b]

    def detection_probability(self, cfg: CncConfig) -> float:
        """Exact probability that a single round raises the flag."""
        rows, _ = self._table(cfg.phase_bits)
        below = readout_magnitudes(cfg.phase_bits) < cfg.threshold
        p_single = rows[:, below].sum(axis=1)
        return float(np.dot(self.spectrum.weights, _median_below_probability(p_single, cfg.pe_repeats)))

    def sample_round(self, cfg: CncConfig, rng: np.random.Generator) -> float:
        _, cdf = self._table(cfg.phase_bits)
        i = int(np.searchsorted(self._weight_cdf, rng.random() * self._weight_cdf[-1], side="right"))
        i = min(i, len(self._weight_cdf) - 1)
        ks = np.searchsorted(cdf[i], rng.random(cfg.pe_repeats), side="right")
        ks = np.minimum(ks, cdf.shape[1] - 1)
        mags = np.sort(readout_magnitudes(cfg.phase_bits)[ks])
        return float(mags[(cfg.pe_repeats - 1) // 2])

    def run(self, cfg: CncConfig, rng=None, counter=None, max_rounds: int | None = None) -> CncOutcome:
        rng = np.random.default_rng(rng)
        d = self.emb.n_cols
        per_round = round_cost(cfg.kappa0, cfg.epsilon, d)
        rounds = cfg.repetitions if max_rounds is None else min(max_rounds, cfg.repetitions)
        flag, mag, used = False, float("nan"), 0
        for _ in range(rounds):
            used += 1
            mag = self.sample_round(cfg, rng)
            if mag < cfg.threshold:
                flag = True
                break
        queries = used * per_round
        if counter is not None:
            counter.add(queries)
        return CncOutcome(flag, mag, used, queries, cfg.repetitions * per_round)


def qcnc(A: HermitianEmbedding, input: InputLike, cfg: CncConfig, rng_seed=None, counter=None,
         engine: str = "kernel") -> CncOutcome:
    """Run the comparator: up to ``cfg.repetitions`` rounds, stopping at the first detection."""
    return Comparator(A, input, engine).run(cfg, rng_seed, counter)


def qcnc_success_probability(A: HermitianEmbedding, input: InputLike, kappa0: float) -> float:
    """Exact weight of the input on eigenvalues with ``|lambda| < 1/kappa0``."""
    _check_embedding(A)
    spec = born_spectrum(A, input)
    if spec.null_weight > NULL_WEIGHT_TOL:
        raise NullSpectrumAnomaly(f"input places weight {spec.null_weight:.3e} on the null space")
    return spec.mass_below(1.0 / kappa0)


def uniform_success_probability(kappa: float, kappa0: float) -> float:
    """Single-round success when eigenvalues are uniform on ``[1/kappa, 1]``."""
    if kappa <= kappa0:
        return 0.0
    return (1.0 / kappa0 - 1.0 / kappa) / (1.0 - 1.0 / kappa)
