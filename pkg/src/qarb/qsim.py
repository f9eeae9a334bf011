"""Dense statevector simulation for the small circuits used by the comparator.

Qubit 0 is the most significant bit of the basis index, so ``|q0 q1 ... q_{n-1}>``
maps to index ``sum(q_k * 2**(n-1-k))``. Operators acting on a leading block of
qubits therefore act on the left factor of a Kronecker product.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateInput, ShapeError

MAX_QUBITS = 20
NORM_TOL = 1e-10


def _n_qubits_for(length: int) -> int:
    if length < 1 or length & (length - 1):
        raise ShapeError(f"length {length} is not a power of two")
    return length.bit_length() - 1


@dataclass(frozen=True)
class StateVector:
    """Unit-norm complex amplitude vector over ``n_qubits`` qubits."""

    amplitudes: np.ndarray
    n_qubits: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.shape[0] != 2 ** self.n_qubits:
            raise ShapeError(f"expected {2 ** self.n_qubits} amplitudes, got shape {amps.shape}")
        if self.n_qubits > MAX_QUBITS:
            raise ShapeError(f"{self.n_qubits} qubits exceeds the simulator cap of {MAX_QUBITS}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ShapeError(f"state norm {norm!r} is not 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def marginal(self, qubits: Sequence[int]) -> np.ndarray:
        """Outcome distribution of measuring ``qubits`` (in the given order)."""
        qubits = list(qubits)
        probs = self.probabilities().reshape([2] * self.n_qubits)
        rest = tuple(q for q in range(self.n_qubits) if q not in qubits)
        marg = probs.sum(axis=rest) if rest else probs
        # sum() keeps remaining axes in ascending order; reorder to the requested one
        order = sorted(qubits)
        marg = np.transpose(marg, [order.index(q) for q in qubits])
        return marg.reshape(-1)


@dataclass(frozen=True)
class UnitaryMatrix:
    entries: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.entries, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise ShapeError(f"unitary must be square, got {u.shape}")
        _n_qubits_for(u.shape[0])
        err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
        if err > 1e-8:
            raise ShapeError(f"matrix is not unitary (max deviation {err:.2e})")
        u.setflags(write=False)
        object.__setattr__(self, "entries", u)

    @property
    def n_qubits(self) -> int:
        return _n_qubits_for(self.entries.shape[0])

    def power(self, k: int) -> "UnitaryMatrix":
        return UnitaryMatrix(np.linalg.matrix_power(self.entries, k))


@dataclass
class RegisterLayout:
    """Named, disjoint qubit ranges allocated in order."""

    registers: dict = field(default_factory=dict)
    n_qubits: int = 0

    def allocate(self, name: str, size: int) -> list[int]:
        if name in self.registers:
            raise ShapeError(f"register {name!r} already allocated")
        if size < 0:
            raise ShapeError("register size must be non-negative")
        qubits = list(range(self.n_qubits, self.n_qubits + size))
        self.registers[name] = qubits
        self.n_qubits += size
        if self.n_qubits > MAX_QUBITS:
            raise ShapeError(f"layout needs {self.n_qubits} qubits, cap is {MAX_QUBITS}")
        return qubits

    def __getitem__(self, name: str) -> list[int]:
        return self.registers[name]

    def check(self) -> None:
        seen: list[int] = []
        for qubits in self.registers.values():
            seen.extend(qubits)
        if sorted(seen) != list(range(self.n_qubits)) or len(set(seen)) != len(seen):
            raise ShapeError("register ranges overlap or leave gaps")


class QueryCounter:
    """Monotonic oracle-call counter safe to share between threads."""

    def __init__(self):
        self._value = 0.0
        self._lock = threading.Lock()

    def add(self, amount: float) -> None:
        if amount < 0:
            raise ValueError("query counter only increases")
        with self._lock:
            self._value += amount

    @property
    def value(self) -> float:
        with self._lock:
            return self._value


def make_state(amplitudes) -> StateVector:
    amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
    n = _n_qubits_for(amps.shape[0])
    norm = np.linalg.norm(amps)
    if norm == 0:
        raise DegenerateInput("cannot normalize the zero vector")
    return StateVector(amps / norm, n)


def basis_state(index: int, n_qubits: int) -> StateVector:
    amps = np.zeros(2 ** n_qubits, dtype=complex)
    amps[index] = 1.0
    return StateVector(amps, n_qubits)


def tensor(*states: StateVector) -> StateVector:
    amps = np.array([1.0 + 0j])
    for s in states:
        amps = np.kron(amps, s.amplitudes)
    return StateVector(amps, sum(s.n_qubits for s in states))


def hamiltonian_unitary(A, t: float = np.pi) -> UnitaryMatrix:
    """Exact ``exp(i t A)`` through the eigendecomposition of Hermitian ``A``.

    ``A`` may be a plain array or any object exposing the matrix as ``.matrix``.
    """
    H = np.asarray(getattr(A, "matrix", A), dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ShapeError(f"Hamiltonian must be square, got {H.shape}")
    if np.max(np.abs(H - H.conj().T), initial=0.0) > 1e-10:
        raise ShapeError("Hamiltonian is not Hermitian")
    evals, evecs = np.linalg.eigh(H)
    U = (evecs * np.exp(1j * t * evals)) @ evecs.conj().T
    return UnitaryMatrix(U)


def _check_indices(n: int, *groups: Sequence[int]) -> None:
    flat = [q for g in groups for q in g]
    if len(set(flat)) != len(flat):
        raise ShapeError(f"qubit index sets overlap: {groups}")
    if any(q < 0 or q >= n for q in flat):
        raise ShapeError(f"qubit index out of range for {n} qubits: {flat}")


def _apply_on_axes(tensor_state: np.ndarray, U: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    k = len(targets)
    Ut = U.reshape([2] * (2 * k))
    moved = np.tensordot(Ut, tensor_state, axes=(list(range(k, 2 * k)), list(targets)))
    # tensordot puts the new target axes first; send them back to their slots
    return np.moveaxis(moved, list(range(k)), list(targets))


def apply_unitary(U, targets: Sequence[int], state: StateVector) -> StateVector:
    return apply_controlled(U, [], targets, state)


def apply_controlled(U, controls, targets: Sequence[int], state: StateVector) -> StateVector:
    """Apply ``U`` to ``targets`` on the subspace where every control matches.

    ``controls`` holds qubit indices (polarity 1) or ``(index, polarity)`` pairs.
    """
    Um = np.asarray(getattr(U, "entries", U), dtype=complex)
    targets = list(targets)
    ctrl = [(c, 1) if isinstance(c, (int, np.integer)) else (int(c[0]), int(c[1])) for c in controls]
    n = state.n_qubits
    _check_indices(n, [c for c, _ in ctrl], targets)
    if Um.shape != (2 ** len(targets), 2 ** len(targets)):
        raise ShapeError(f"operator shape {Um.shape} does not match {len(targets)} target qubits")
    psi = np.array(state.amplitudes).reshape([2] * n)
    if ctrl:
        sel = [slice(None)] * n
        for c, pol in ctrl:
            sel[c] = pol
        sel = tuple(sel)
        sub = psi[sel]
        # axes of `sub` are the non-control qubits in ascending order
        free = [q for q in range(n) if q not in {c for c, _ in ctrl}]
        psi[sel] = _apply_on_axes(sub, Um, [free.index(t) for t in targets])
    else:
        psi = _apply_on_axes(psi, Um, targets)
    return StateVector(psi.reshape(-1), n)


def project_qubit(state: StateVector, index: int, bit: int):
    """Project one qubit onto ``|bit>``; returns ``(probability, collapsed_state_or_None)``."""
    n = state.n_qubits
    if not 0 <= index < n:
        raise ShapeError(f"qubit {index} out of range for {n} qubits")
    p = float(state.marginal([index])[bit])
    if p <= 0.0:
        return 0.0, None
    psi = np.array(state.amplitudes).reshape([2] * n)
    sel = [slice(None)] * n
    sel[index] = 1 - bit
    psi[tuple(sel)] = 0.0
    return p, StateVector(psi.reshape(-1) / np.sqrt(p), n)


def measure_qubit(state: StateVector, index: int, rng=None):
    """Projective Z measurement of one qubit.

    Returns ``(bit, collapsed_state, probability_of_bit)``.
    """
    if not 0 <= index < state.n_qubits:
        raise ShapeError(f"qubit {index} out of range for {state.n_qubits} qubits")
    rng = np.random.default_rng(rng)
    p1 = state.marginal([index])[1]
    bit = int(rng.random() < p1)
    p, collapsed = project_qubit(state, index, bit)
    return bit, collapsed, p


def qft_matrix(n_qubits: int, inverse: bool = False) -> np.ndarray:
    N = 2 ** n_qubits
    k = np.arange(N)
    sign = -1.0 if inverse else 1.0
    return np.exp(sign * 2j * np.pi * np.outer(k, k) / N) / np.sqrt(N)


HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


def phase_estimation_state(U, state: StateVector, b: int) -> StateVector:
    """Run textbook phase estimation and return the joint pre-measurement state.

    The result has the ``b`` phase qubits first, followed by ``state``'s qubits.
    ``U`` acts on the leading qubits of ``state``; any trailing qubits are an
    untouched reference register.
    """
    if b < 1:
        raise ShapeError("phase estimation needs at least one precision bit")
    Um = np.asarray(getattr(U, "entries", U), dtype=complex)
    n_sys = _n_qubits_for(Um.shape[0])
    if n_sys > state.n_qubits:
        raise ShapeError(f"unitary acts on {n_sys} qubits but the input has {state.n_qubits}")
    joint = tensor(basis_state(0, b), state)
    for q in range(b):
        joint = apply_unitary(HADAMARD, [q], joint)
    system = list(range(b, b + n_sys))
    power = Um
    # phase qubit b-1 is the least significant, so it controls U^1
    for q in reversed(range(b)):
        joint = apply_controlled(power, [q], system, joint)
        power = power @ power
    return apply_unitary(qft_matrix(b, inverse=True), list(range(b)), joint)


def phase_estimation(U, state: StateVector, b: int) -> np.ndarray:
    """Exact readout distribution over the ``2**b`` phase-register outcomes.

    Outcome ``k`` estimates the eigenphase ``k / 2**b`` of ``U = exp(2 pi i phi)``.
    """
    joint = phase_estimation_state(U, state, b)
    return joint.marginal(range(b))


def phase_kernel(phases, b: int) -> np.ndarray:
    """Closed-form phase-estimation readout probabilities for eigenphases ``phases``.

    Row ``i`` is the distribution of the ``b``-bit readout when the input is an
    eigenstate with eigenphase ``phases[i]`` (in turns). Equals the squared
    Dirichlet kernel ``sin^2(pi N d) / (N^2 sin^2(pi d))`` with ``d = phi - k/N``.
    """
    phases = np.atleast_1d(np.asarray(phases, dtype=float))
    N = 2 ** b
    delta = phases[:, None] - np.arange(N)[None, :] / N
    num = np.sin(np.pi * N * delta) ** 2
    den = (N * np.sin(np.pi * delta)) ** 2
    near = np.isclose(np.sin(np.pi * delta), 0.0, atol=1e-13)
    return np.where(near, 1.0, num / np.where(near, 1.0, den))
