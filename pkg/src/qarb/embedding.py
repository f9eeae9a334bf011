"""Hermitian block embedding of a price matrix and exact spectral oracles.

Layout of the embedding space (before padding to a power of two)::

    [ row block: N coordinates | column block: d coordinates | zero padding ]

so ``A = [[0, X], [X.T, 0]]`` sits in the top-left ``(N+d) x (N+d)`` corner.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateInput, RankDeficient, ShapeError
from .qsim import StateVector

MODES = ("spectral", "frobenius")


def _rank_tol(sv: np.ndarray, shape) -> float:
    return max(shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)


@dataclass(frozen=True)
class HermitianEmbedding:
    matrix: np.ndarray
    block: np.ndarray  # the normalized X, kept for the SVD route
    n_rows: int
    n_cols: int
    mode: str
    scale_factor: float

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.dim.bit_length() - 1

    @property
    def column_slice(self) -> slice:
        return slice(self.n_rows, self.n_rows + self.n_cols)

    @property
    def norm(self) -> float:
        """Spectral norm, i.e. the largest singular value of the block."""
        return float(np.linalg.norm(self.block, 2))


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: np.ndarray
    singular_values: np.ndarray
    kappa: float
    rank: int


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got {X.ndim} dimensions")
    if not np.all(np.isfinite(X)):
        raise ShapeError("matrix contains non-finite entries")
    return X


def build_embedding(X, mode: str = "spectral") -> HermitianEmbedding:
    """Embed an ``N x d`` matrix as a real symmetric matrix of power-of-two size.

    ``spectral`` mode divides by the largest singular value so ``||A||_2 = 1``;
    ``frobenius`` mode scales so that ``||A||_F = sqrt(d)``.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown normalization mode {mode!r}")
    X = _as_matrix(X)
    N, d = X.shape
    if N < d or d < 1:
        raise ShapeError(f"need N >= d >= 1, got {X.shape}")
    sv = np.linalg.svd(X, compute_uv=False)
    if sv[0] == 0:
        raise DegenerateInput("cannot embed the zero matrix")
    if sv[-1] <= _rank_tol(sv, X.shape):
        raise RankDeficient(f"matrix has rank < {d} (smallest singular value {sv[-1]:.3e})")
    if mode == "spectral":
        scale = float(sv[0])
    else:
        # ||A||_F^2 = 2 ||X||_F^2
        scale = float(np.sqrt(2.0 * np.sum(sv ** 2) / d))
    block = X / scale
    size = 1 << max(1, int(np.ceil(np.log2(N + d))))
    A = np.zeros((size, size))
    A[:N, N:N + d] = block
    A[N:N + d, :N] = block.T
    return HermitianEmbedding(A, block, N, d, mode, scale)


def exact_condition_number(X) -> SpectralReport:
    """Dense-SVD ground truth for ``kappa = sigma_max / sigma_min``.

    ``eigenvalues`` lists the spectrum of the unpadded embedding, i.e. the
    singular values with both signs plus ``N - d`` structural zeros.
    """
    X = _as_matrix(X)
    sv = np.linalg.svd(X, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        raise DegenerateInput("condition number of the zero matrix is undefined")
    tol = _rank_tol(sv, X.shape)
    rank = int(np.sum(sv > tol))
    kappa = float(sv[0] / sv[-1]) if sv[-1] > tol else float("inf")
    N, d = X.shape
    zeros = np.zeros(abs(N - d))
    eig = np.sort(np.concatenate([sv, -sv, zeros]))
    return SpectralReport(eig, np.sort(sv), kappa, rank)


def embedding_spectrum(emb: HermitianEmbedding) -> np.ndarray:
    """Eigenvalues of the full (padded) embedding by dense diagonalization."""
    return np.linalg.eigvalsh(emb.matrix)


def _reference_qubits(n: int) -> int:
    return max(0, int(np.ceil(np.log2(n)))) if n > 1 else 0


def encode_data_state(X) -> StateVector:
    """Amplitude-encode ``X`` as ``sum_tj X[t, j] |col_j>|t>`` over embedding and time registers.

    The embedding register carries the stock index on its column block; the
    trailing reference register carries the time index. Row block and padding of
    the embedding register get exactly zero amplitude.
    """
    X = _as_matrix(X)
    if not np.any(X):
        raise DegenerateInput("cannot encode the zero matrix")
    N, d = X.shape
    size = 1 << max(1, int(np.ceil(np.log2(N + d))))
    n_ref = _reference_qubits(N)
    amps = np.zeros((size, 2 ** n_ref))
    amps[N:N + d, :N] = X.T
    amps = amps.reshape(-1)
    return StateVector(amps / np.linalg.norm(amps), int(np.log2(size)) + n_ref)


def uniform_column_state(n_rows: int, n_cols: int) -> StateVector:
    """Maximally entangled state ``d**-0.5 sum_j |col_j>|j>``.

    Its reduced state on the embedding register is the maximally mixed state on
    the column block, so each right singular vector is sampled with weight ``1/d``.
    """
    size = 1 << max(1, int(np.ceil(np.log2(n_rows + n_cols))))
    n_ref = _reference_qubits(n_cols)
    amps = np.zeros((size, 2 ** n_ref))
    amps[n_rows + np.arange(n_cols), np.arange(n_cols)] = 1.0
    amps = amps.reshape(-1)
    return StateVector(amps / np.linalg.norm(amps), int(np.log2(size)) + n_ref)


def center_columns(X) -> np.ndarray:
    X = _as_matrix(X)
    return X - X.mean(axis=0, keepdims=True)
