"""Dense state-vector and density-matrix simulation.

Bit ordering is little-endian: qubit 0 is the least-significant bit of a
basis-state index. A k-qubit matrix acting on ``targets`` uses the same
convention locally, so ``targets[0]`` is the low bit of the matrix index.

Public functions validate their inputs; the ``*_array`` helpers skip all
checks and are what the circuit executors call in their inner loops.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ArgumentError, QubitIndexError, SizeError, ValidationError

MAX_QUBITS = 12

NORM_TOL = 1e-10
UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_FLOOR = -1e-9
KRAUS_TOL = 1e-8
PROB_TOL = 1e-9


def _check_n_qubits(n_qubits: int) -> None:
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise SizeError(f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.complex128, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_n_qubits(self.n_qubits)
        amps = _frozen(np.asarray(self.amplitudes).reshape(-1))
        if amps.shape != (1 << self.n_qubits,):
            raise SizeError(f"expected {1 << self.n_qubits} amplitudes, got {amps.shape[0]}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError(f"state is not normalized (norm^2 = {norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits


@dataclass(frozen=True)
class DensityMatrix:
    n_qubits: int
    elements: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_n_qubits(self.n_qubits)
        rho = _frozen(self.elements)
        dim = 1 << self.n_qubits
        if rho.shape != (dim, dim):
            raise SizeError(f"expected a {dim}x{dim} matrix, got {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
            raise ValidationError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValidationError(f"density matrix trace is {tr!r}, expected 1")
        if np.linalg.eigvalsh(rho).min() < PSD_FLOOR:
            raise ValidationError("density matrix has negative eigenvalues")
        object.__setattr__(self, "elements", rho)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    @classmethod
    def from_state(cls, state: StateVector) -> "DensityMatrix":
        psi = state.amplitudes
        return cls(state.n_qubits, np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityMatrix":
        _check_n_qubits(n_qubits)
        dim = 1 << n_qubits
        return cls(n_qubits, np.eye(dim) / dim)


@dataclass(frozen=True)
class CountHistogram:
    """Shot counts keyed by basis-state index. Only nonzero entries are stored."""

    counts: dict[int, int]
    shots: int
    n_outcomes: int

    def __post_init__(self):
        if self.shots < 1:
            raise ArgumentError("shots must be >= 1")
        if sum(self.counts.values()) != self.shots:
            raise ValidationError("counts do not sum to shots")
        if any(c < 0 for c in self.counts.values()):
            raise ValidationError("negative count")
        if any(not 0 <= k < self.n_outcomes for k in self.counts):
            raise ValidationError("count key outside outcome range")

    @classmethod
    def from_array(cls, counts: np.ndarray) -> "CountHistogram":
        counts = np.asarray(counts, dtype=np.int64)
        nz = np.flatnonzero(counts)
        return cls({int(k): int(counts[k]) for k in nz}, int(counts.sum()), counts.size)

    def to_array(self) -> np.ndarray:
        out = np.zeros(self.n_outcomes, dtype=np.int64)
        for k, c in self.counts.items():
            out[k] = c
        return out

    def frequencies(self) -> np.ndarray:
        return self.to_array() / self.shots


# --------------------------------------------------------------------------
# array-level kernels


def apply_matrix_array(tensor: np.ndarray, u: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Contract ``u`` into ``tensor`` along ``axes``; ``axes[m]`` carries local bit m."""
    k = len(axes)
    order = list(reversed(axes))
    front = np.moveaxis(tensor, order, range(k))
    shape = front.shape
    out = (u @ front.reshape(1 << k, -1)).reshape(shape)
    return np.moveaxis(out, range(k), order)


def vector_axes(n_qubits: int, targets: Sequence[int]) -> list[int]:
    return [n_qubits - 1 - q for q in targets]


def apply_unitary_array(vec: np.ndarray, n_qubits: int, u: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """``vec`` has shape (2**n, *batch)."""
    batch = vec.shape[1:]
    t = vec.reshape((2,) * n_qubits + batch)
    t = apply_matrix_array(t, u, vector_axes(n_qubits, targets))
    return t.reshape(vec.shape)


def conjugate_array(rho: np.ndarray, n_qubits: int, k: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """K rho K^dagger for ``rho`` of shape (2**n, 2**n, *batch)."""
    batch = rho.shape[2:]
    t = rho.reshape((2,) * (2 * n_qubits) + batch)
    rows = [n_qubits - 1 - q for q in targets]
    cols = [2 * n_qubits - 1 - q for q in targets]
    t = apply_matrix_array(t, k, rows)
    t = apply_matrix_array(t, k.conj(), cols)
    return t.reshape(rho.shape)


def apply_kraus_array(rho: np.ndarray, n_qubits: int, kraus: Sequence[np.ndarray], targets: Sequence[int]) -> np.ndarray:
    out = np.zeros_like(rho)
    for k in kraus:
        out += conjugate_array(rho, n_qubits, k, targets)
    return out


# --------------------------------------------------------------------------
# validated operations


def zero_state(n_qubits: int) -> StateVector:
    _check_n_qubits(n_qubits)
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def basis_state(n_qubits: int, index: int) -> StateVector:
    _check_n_qubits(n_qubits)
    if not 0 <= index < (1 << n_qubits):
        raise QubitIndexError(f"basis index {index} out of range for {n_qubits} qubits")
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[index] = 1.0
    return StateVector(n_qubits, amps)


def check_targets(n_qubits: int, targets: Sequence[int]) -> list[int]:
    targets = [int(t) for t in targets]
    if not targets:
        raise QubitIndexError("at least one target qubit is required")
    if len(set(targets)) != len(targets):
        raise QubitIndexError(f"duplicate target qubits {targets}")
    for t in targets:
        if not 0 <= t < n_qubits:
            raise QubitIndexError(f"target qubit {t} out of range for {n_qubits} qubits")
    return targets


def _check_square(u: np.ndarray, k: int) -> np.ndarray:
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (1 << k, 1 << k):
        raise SizeError(f"matrix shape {u.shape} does not match {k} target qubit(s)")
    return u


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.allclose(
        u.conj().T @ u, np.eye(u.shape[0]), rtol=0, atol=tol
    )


def apply_unitary(state: StateVector, u: np.ndarray, targets: Sequence[int]) -> StateVector:
    targets = check_targets(state.n_qubits, targets)
    u = _check_square(u, len(targets))
    if not is_unitary(u):
        raise ValidationError("matrix is not unitary")
    out = apply_unitary_array(state.amplitudes, state.n_qubits, u, targets)
    return StateVector(state.n_qubits, out)


def check_kraus(kraus: Sequence[np.ndarray], tol: float = KRAUS_TOL) -> list[np.ndarray]:
    ops = [np.asarray(k, dtype=np.complex128) for k in kraus]
    if not ops:
        raise ValidationError("empty Kraus set")
    dim = ops[0].shape[0]
    if any(k.shape != (dim, dim) for k in ops):
        raise ValidationError("Kraus operators must be square and of equal dimension")
    total = sum(k.conj().T @ k for k in ops)
    if not np.allclose(total, np.eye(dim), rtol=0, atol=tol):
        raise ValidationError("Kraus set is not trace preserving (sum K^dag K != I)")
    return ops


def apply_channel(rho: DensityMatrix, kraus: Sequence[np.ndarray], targets: Sequence[int]) -> DensityMatrix:
    targets = check_targets(rho.n_qubits, targets)
    ops = check_kraus(kraus)
    if ops[0].shape[0] != 1 << len(targets):
        raise SizeError("Kraus dimension does not match the number of targets")
    out = apply_kraus_array(rho.elements, rho.n_qubits, ops, targets)
    return DensityMatrix(rho.n_qubits, out)


def probabilities(state: StateVector | DensityMatrix) -> np.ndarray:
    if isinstance(state, StateVector):
        p = np.abs(state.amplitudes) ** 2
    elif isinstance(state, DensityMatrix):
        p = np.diagonal(state.elements).real.copy()
    else:
        raise TypeError(f"expected StateVector or DensityMatrix, got {type(state).__name__}")
    return clean_probabilities(p)


def clean_probabilities(p: np.ndarray) -> np.ndarray:
    """Clip round-off negatives and renormalize."""
    p = np.clip(np.asarray(p, dtype=np.float64), 0.0, None)
    return p / p.sum()


def check_probabilities(p: np.ndarray, tol: float = PROB_TOL) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size < 2 or p.size & (p.size - 1):
        raise SizeError(f"probability vector length must be 2^m with m >= 1, got {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValidationError("probabilities must be finite and nonnegative")
    if abs(p.sum() - 1.0) > tol:
        raise ValidationError(f"probabilities sum to {p.sum()!r}, expected 1")
    return p


def sample_counts(p: np.ndarray, shots: int, seed: int) -> CountHistogram:
    p = check_probabilities(p)
    if not isinstance(shots, (int, np.integer)) or shots < 1:
        raise ArgumentError(f"shots must be a positive integer, got {shots!r}")
    rng = np.random.default_rng(seed)
    return CountHistogram.from_array(rng.multinomial(int(shots), p / p.sum()))


def embed_in_larger_register(state: StateVector, total_qubits: int) -> StateVector:
    """``state`` on the low qubits, ``|0...0>`` on the appended high qubits."""
    _check_n_qubits(total_qubits)
    if total_qubits < state.n_qubits:
        raise SizeError(f"cannot embed {state.n_qubits} qubits into {total_qubits}")
    pad = np.zeros(1 << (total_qubits - state.n_qubits), dtype=np.complex128)
    pad[0] = 1.0
    return StateVector(total_qubits, np.kron(pad, state.amplitudes))
