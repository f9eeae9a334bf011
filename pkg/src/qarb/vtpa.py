"""Variable time preselection: a cascade of comparators at thresholds 2, 4, ..., 2**M.

Stage ``j`` runs the comparator at ``kappa_j = 2**j`` only on the branch where
every earlier clock qubit reads 1, writes its verdict to clock ``C_j`` and raises
the stop flag when ``C_j`` stays 0. Two realizations are provided:

* :func:`vtpa` measures each clock right after its stage and skips the rest of
  the cascade once the flag is up. Every comparator round re-prepares the input.
* :class:`CoherentCascade` keeps the clock, flag and phase registers in one
  statevector (tiny instances only) and reproduces the register trace exactly.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

import numpy as np

from .embedding import HermitianEmbedding
from .errors import ConfigError, DegenerateInput, ProtocolViolation, ShapeError
from .qcnc import CncConfig, Comparator, InputLike, readout_magnitudes, round_cost
from .qsim import (
    HADAMARD,
    PAULI_X,
    RegisterLayout,
    StateVector,
    apply_controlled,
    basis_state,
    hamiltonian_unitary,
    project_qubit,
    qft_matrix,
    tensor,
)


@dataclass(frozen=True)
class VtpaConfig:
    kappa0: float
    epsilon: float = 0.01
    boost: float = 1.0
    extra_bits: int = 2
    pe_repeats: int | None = None

    def __post_init__(self):
        if not self.kappa0 > 1:
            raise ConfigError(f"kappa0 must exceed 1, got {self.kappa0}")
        if not 0 < self.epsilon < 1:
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.boost <= 0:
            raise ConfigError("boost must be positive")
        if self.extra_bits < 1:
            raise ConfigError("extra_bits must be at least 1")

    @property
    def M(self) -> int:
        return max(1, math.ceil(math.log2(self.kappa0) - 1e-12))

    def stage_config(self, j: int) -> CncConfig:
        kappa_j = 2.0 ** j
        return CncConfig(
            kappa0=kappa_j,
            epsilon=self.epsilon,
            repetitions=math.ceil(2 * kappa_j * self.boost),
            phase_bits=j + self.extra_bits,
            pe_repeats=self.pe_repeats,
        )


@dataclass(frozen=True)
class VtpaOutcome:
    stopped: bool
    clock_pattern: tuple
    kappa_interval: tuple
    total_queries: float
    spent_queries: float
    kappa0: float
    d: int
    epsilon: float
    true_kappa: float | None = None

    @property
    def ones(self) -> int:
        return sum(self.clock_pattern)

    def to_dict(self) -> dict:
        return {
            "stopped": self.stopped,
            "clock_pattern": "".join(str(b) for b in self.clock_pattern),
            "kappa_interval": [self.kappa_interval[0], None if math.isinf(self.kappa_interval[1]) else self.kappa_interval[1]],
            "total_queries": self.total_queries,
            "spent_queries": self.spent_queries,
        }


def is_prefix_pattern(pattern) -> bool:
    """True for ``1^j 0^(M-j)``."""
    seen_zero = False
    for bit in pattern:
        if bit == 0:
            seen_zero = True
        elif seen_zero:
            return False
    return True


def interval_for(pattern, kappa0: float) -> tuple:
    j = sum(pattern)
    if j == len(pattern):
        return (float(kappa0), math.inf)
    return (2.0 ** j, 2.0 ** (j + 1))


class Cascade:
    """Measured cascade on one matrix; call :meth:`stage` with ``j = 1, 2, ...``."""

    def __init__(self, A: HermitianEmbedding, input: InputLike, cfg: VtpaConfig, rng=None,
                 counter=None, comparator: Comparator | None = None):
        self.cfg = cfg
        self.comparator = comparator or Comparator(A, input)
        self.rng = np.random.default_rng(rng)
        self.counter = counter
        self.clocks = [0] * cfg.M
        self.flag = 0
        self.next_stage = 1
        self.total_queries = 0.0
        self.spent_queries = 0.0

    def stage(self, j: int) -> None:
        if j != self.next_stage or j > self.cfg.M:
            raise ProtocolViolation(f"stage {j} invoked, expected stage {self.next_stage}")
        self.next_stage += 1
        if self.flag:
            return
        stage_cfg = self.cfg.stage_config(j)
        outcome = self.comparator.run(stage_cfg, self.rng, self.counter)
        d = self.comparator.emb.n_cols
        self.total_queries += stage_cfg.repetitions * round_cost(stage_cfg.kappa0, stage_cfg.epsilon, d)
        self.spent_queries += outcome.queries
        if outcome.flag:
            self.clocks[j - 1] = 1
        else:
            self.flag = 1

    def outcome(self) -> VtpaOutcome:
        pattern = tuple(self.clocks)
        return VtpaOutcome(
            stopped=bool(self.flag),
            clock_pattern=pattern,
            kappa_interval=interval_for(pattern, self.cfg.kappa0),
            total_queries=self.total_queries,
            spent_queries=self.spent_queries,
            kappa0=self.cfg.kappa0,
            d=self.comparator.emb.n_cols,
            epsilon=self.cfg.epsilon,
        )


def vtpa(A: HermitianEmbedding, input: InputLike, cfg: VtpaConfig, rng_seed=None, counter=None,
         comparator: Comparator | None = None) -> VtpaOutcome:
    """Run stages ``1..M``; stages after the flag is raised cost nothing."""
    cascade = Cascade(A, input, cfg, rng_seed, counter, comparator)
    for j in range(1, cfg.M + 1):
        cascade.stage(j)
        if cascade.flag:
            break
    return cascade.outcome()


# -- coherent statevector cascade ------------------------------------------------

class CoherentCascade:
    """Cascade with clock, flag and ancilla registers held in one statevector.

    Each stage runs a single phase estimation (one comparator round) into its own
    ancilla register ``P_j`` and copies the threshold verdict into ``C_j``.
    """

    def __init__(self, A: HermitianEmbedding, input: StateVector, M: int, extra_bits: int = 2):
        if M < 1:
            raise ConfigError("cascade needs at least one stage")
        if input.dim % A.dim:
            raise ShapeError("input does not factor over the embedding register")
        self.A = A
        self.M = M
        self.layout = RegisterLayout()
        self.system = self.layout.allocate("system", input.n_qubits)
        self.clock = self.layout.allocate("clock", M)
        self.flag = self.layout.allocate("flag", 1)[0]
        self.bits = [j + extra_bits for j in range(1, M + 1)]
        self.ancilla = [self.layout.allocate(f"P{j}", b) for j, b in enumerate(self.bits, start=1)]
        self.layout.check()
        n_rest = self.layout.n_qubits - input.n_qubits
        self.state = tensor(input, basis_state(0, n_rest))
        self.unitary = hamiltonian_unitary(A.matrix, np.pi).entries
        self.sys_targets = self.system[: A.n_qubits]
        self.next_stage = 1

    def stage(self, j: int) -> None:
        if j != self.next_stage or j > self.M:
            raise ProtocolViolation(f"stage {j} invoked, expected stage {self.next_stage}")
        self.next_stage += 1
        prior = [(c, 1) for c in self.clock[: j - 1]]
        reg = self.ancilla[j - 1]
        b = len(reg)
        psi = self.state
        for q in reg:
            psi = apply_controlled(HADAMARD, prior, [q], psi)
        power = self.unitary
        for q in reversed(reg):
            psi = apply_controlled(power, prior + [(q, 1)], self.sys_targets, psi)
            power = power @ power
        psi = apply_controlled(qft_matrix(b, inverse=True), prior, reg, psi)
        below = np.flatnonzero(readout_magnitudes(b) < 2.0 ** -j)
        for k in below:
            pattern = [(q, (int(k) >> (b - 1 - i)) & 1) for i, q in enumerate(reg)]
            psi = apply_controlled(PAULI_X, prior + pattern, [self.clock[j - 1]], psi)
        psi = apply_controlled(PAULI_X, prior + [(self.clock[j - 1], 0)], [self.flag], psi)
        self.state = psi

    def run(self) -> "CoherentCascade":
        for j in range(self.next_stage, self.M + 1):
            self.stage(j)
        return self

    def register_distribution(self) -> dict:
        """Probability of each ``(clock_pattern, flag)`` pair."""
        qubits = self.clock + [self.flag]
        probs = self.state.marginal(qubits)
        out = {}
        for idx in np.flatnonzero(probs > 1e-14):
            bits = [(int(idx) >> (len(qubits) - 1 - i)) & 1 for i in range(len(qubits))]
            out[(tuple(bits[:-1]), bits[-1])] = float(probs[idx])
        return out


def measured_distribution(A: HermitianEmbedding, input: StateVector, M: int, extra_bits: int = 2) -> dict:
    """Exact ``(clock_pattern, flag)`` law when each clock is measured after its stage.

    Enumerates both measurement branches of every stage instead of sampling.
    """
    out: dict = defaultdict(float)
    base = CoherentCascade(A, input, M, extra_bits)

    def walk(state: StateVector, j: int, weight: float):
        if j > M:
            bits = state.marginal(base.clock + [base.flag])
            idx = int(np.argmax(bits))
            key = tuple((idx >> (M - i)) & 1 for i in range(M + 1))
            out[(key[:-1], key[-1])] += weight
            return
        base.state = state
        base.next_stage = j
        base.stage(j)
        after = base.state
        for bit in (0, 1):
            p, collapsed = project_qubit(after, base.clock[j - 1], bit)
            if p > 1e-14:
                walk(collapsed, j + 1, weight * p)

    walk(base.state, 1, 1.0)
    return dict(out)


# -- query accounting -----------------------------------------------------------

def band_of(kappa: float) -> int:
    """Band ``j`` with ``2**(j-1) <= kappa < 2**j``."""
    if not kappa >= 1:
        raise ConfigError(f"condition number must be >= 1, got {kappa}")
    return int(math.floor(math.log2(kappa))) + 1


def cumulative_queries(j: int, epsilon: float, d: int) -> float:
    """Worst-case queries of a run that executes stages ``1..j``."""
    from .qcnc import qcnc_cost

    return sum(qcnc_cost(2.0 ** k, epsilon, d) for k in range(1, j + 1))


def cumulative_envelope(j: int, epsilon: float, d: int) -> float:
    """Closed-form upper bound ``4^(j+1) j / 3 * sqrt(d) * log2(1/eps)^2``."""
    return 4.0 ** (j + 1) * j / 3.0 * math.sqrt(d) * math.log2(1.0 / epsilon) ** 2


def fit_loglog(x, y) -> tuple[float, float]:
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept)


def query_ledger(outcomes: Iterable[VtpaOutcome] | Mapping) -> dict:
    """Per-band cumulative queries ``T_j``, ensemble average ``T_avg`` and scaling slope.

    Outcomes are grouped by their ``kappa0``; each needs ``true_kappa`` set for
    band assignment. The slope of ``log T_avg`` against ``log kappa0`` is
    reported when two or more thresholds are present.
    """
    if isinstance(outcomes, Mapping):
        outcomes = [o for group in outcomes.values() for o in group]
    outcomes = list(outcomes)
    if not outcomes:
        raise DegenerateInput("query ledger needs at least one outcome")
    groups: dict = defaultdict(list)
    for o in outcomes:
        groups[o.kappa0].append(o)
    per = {}
    for kappa0, group in sorted(groups.items()):
        bands: dict = defaultdict(list)
        for o in group:
            if o.true_kappa is None:
                raise ConfigError("every outcome needs true_kappa for band assignment")
            bands[band_of(o.true_kappa)].append(o.total_queries)
        n = len(group)
        d, eps = group[0].d, group[0].epsilon
        band_report = {
            j: {"count": len(v), "P_j": len(v) / n, "T_j": float(np.mean(v))}
            for j, v in sorted(bands.items())
        }
        per[kappa0] = {
            "n": n,
            "T_avg": float(np.mean([o.total_queries for o in group])),
            "spent_avg": float(np.mean([o.spent_queries for o in group])),
            "envelope": sum(
                b["P_j"] * cumulative_envelope(min(j, max(1, math.ceil(math.log2(kappa0)))), eps, d)
                for j, b in band_report.items()
            ),
            "bands": band_report,
        }
    report = {"per_kappa0": per, "slope": None, "intercept": None}
    if len(per) >= 2:
        ks = sorted(per)
        report["slope"], report["intercept"] = fit_loglog(ks, [per[k]["T_avg"] for k in ks])
    return report


def with_true_kappa(outcome: VtpaOutcome, kappa: float) -> VtpaOutcome:
    return replace(outcome, true_kappa=float(kappa))
