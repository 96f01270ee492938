"""Two-qubit depolarizing gate error plus per-qubit readout error.

Two executors realise the same channel: exact density-matrix evolution and
Monte-Carlo Kraus trajectories. Readout error is a classical confusion
process, applied to outcome distributions or to sampled bits, never to the
quantum state.
"""
from __future__ import annotations

import functools
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qsim
from .circuit import ParameterizedCircuit, bound_matrices, gate_angles
from .errors import ArgumentError, SizeError, ValidationError
from .qsim import CountHistogram, DensityMatrix, StateVector

PAULIS = (
    np.eye(2, dtype=np.complex128),
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)

# Per-device error rates from the hardware comparison: (readout error, CX error).
# ``None`` readout means the source reports none for that device.
DEVICE_PRESETS: dict[str, tuple[float | None, float]] = {
    "noise_model": (None, 2.00e-2),
    "ibmq_jakarta": (2.80e-2, 1.37e-2),
    "ibm_lagos": (1.15e-2, 5.58e-3),
    "ibmq_casablanca": (2.61e-2, 4.58e-2),
    "ibm_perth": (2.34e-2, 1.68e-2),
    "ionq": (None, 1.59e-2),
}

TRAJECTORY_CHUNK = 4096


@dataclass(frozen=True)
class NoiseModel:
    """``readout[q] = (eps01, eps10)``: P(read 1 | 0) and P(read 0 | 1) on qubit q.

    An empty ``readout`` means perfect measurement on every qubit.
    """

    two_qubit_depol: float = 0.0
    readout: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        lam = float(self.two_qubit_depol)
        if not 0.0 <= lam <= 1.0:
            raise ArgumentError(f"two_qubit_depol must be in [0, 1], got {lam!r}")
        ro = tuple((float(a), float(b)) for a, b in self.readout)
        for pair in ro:
            for eps in pair:
                if not 0.0 <= eps <= 0.5:
                    raise ArgumentError(f"readout error must be in [0, 0.5], got {eps!r}")
        object.__setattr__(self, "two_qubit_depol", lam)
        object.__setattr__(self, "readout", ro)

    @classmethod
    def uniform(cls, depol: float = 0.0, readout: float | None = None, n_qubits: int = 0) -> "NoiseModel":
        """Symmetric readout error ``readout`` on each of ``n_qubits`` qubits."""
        if not readout:
            return cls(depol)
        return cls(depol, tuple((readout, readout) for _ in range(n_qubits)))

    @classmethod
    def from_device(cls, name: str, n_qubits: int) -> "NoiseModel":
        try:
            readout, cx = DEVICE_PRESETS[name]
        except KeyError:
            raise ArgumentError(f"unknown device preset {name!r}; known: {sorted(DEVICE_PRESETS)}") from None
        return cls.uniform(cx, readout, n_qubits)

    @property
    def is_noiseless(self) -> bool:
        return self.two_qubit_depol == 0.0 and not self.has_readout

    @property
    def has_readout(self) -> bool:
        return any(a or b for a, b in self.readout)

    def restricted(self, n_qubits: int) -> "NoiseModel":
        """Noise seen by a circuit on the first ``n_qubits`` device qubits."""
        if not self.readout:
            return self
        if len(self.readout) < n_qubits:
            raise SizeError(
                f"noise model has readout entries for {len(self.readout)} qubits, need {n_qubits}"
            )
        return NoiseModel(self.two_qubit_depol, self.readout[:n_qubits])

    def to_dict(self) -> dict:
        return {"two_qubit_depol": self.two_qubit_depol, "readout": [list(p) for p in self.readout]}

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseModel":
        return cls(float(d.get("two_qubit_depol", 0.0)), tuple(tuple(p) for p in d.get("readout", [])))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "NoiseModel":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class KrausSet:
    ops: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(qsim.check_kraus(self.ops)))

    def __iter__(self):
        return iter(self.ops)

    def __len__(self):
        return len(self.ops)

    @property
    def dim(self) -> int:
        return self.ops[0].shape[0]


@functools.lru_cache(maxsize=64)
def depolarizing_kraus(lam: float, k_qubits: int = 2) -> KrausSet:
    """Kraus form of rho -> (1 - lam) rho + lam I / 2**k."""
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ArgumentError(f"depolarizing parameter must be in [0, 1], got {lam!r}")
    if k_qubits not in (1, 2):
        raise ArgumentError("depolarizing channel is defined for 1 or 2 qubits")
    d2 = 4**k_qubits
    ident = np.eye(1 << k_qubits, dtype=np.complex128)
    if lam == 0.0:
        return KrausSet((ident,))
    ops = [math.sqrt(1 - (d2 - 1) * lam / d2) * ident]
    for labels in itertools.product(range(4), repeat=k_qubits):
        if not any(labels):
            continue
        pauli = functools.reduce(np.kron, [PAULIS[i] for i in reversed(labels)])
        ops.append(math.sqrt(lam / d2) * pauli)
    return KrausSet(tuple(ops))


def run_density_array(
    circuit: ParameterizedCircuit, angles: np.ndarray, lam: float, rho: np.ndarray
) -> np.ndarray:
    """Evolve ``rho`` of shape (2**n, 2**n, *batch); depolarize after each CX."""
    n = circuit.n_qubits
    kraus = depolarizing_kraus(lam, 2).ops if lam > 0 else None
    for g, u in zip(circuit.gates, bound_matrices(circuit, angles)):
        rho = qsim.conjugate_array(rho, n, u, g.targets)
        if g.kind == "CX" and kraus is not None:
            rho = qsim.apply_kraus_array(rho, n, kraus, g.targets)
    return rho


def execute_density(
    circuit: ParameterizedCircuit, theta: Sequence[float], noise: NoiseModel, input: DensityMatrix
) -> DensityMatrix:
    angles = gate_angles(circuit, theta)
    if input.n_qubits != circuit.n_qubits:
        raise ArgumentError(f"input has {input.n_qubits} qubits, circuit has {circuit.n_qubits}")
    rho = run_density_array(circuit, angles, noise.two_qubit_depol, input.elements)
    return DensityMatrix(circuit.n_qubits, (rho + rho.conj().T) / 2)


def apply_readout(p: np.ndarray, noise: NoiseModel) -> np.ndarray:
    """Push outcome distribution(s) through the per-qubit confusion matrices.

    ``p`` may carry trailing batch axes: shape (2**n, *batch).
    """
    p = np.asarray(p, dtype=np.float64)
    if not noise.readout:
        return p
    n = len(noise.readout)
    if p.shape[0] != 1 << n:
        raise ArgumentError(
            f"distribution over {p.shape[0]} outcomes does not match {n} readout entries"
        )
    batch = p.shape[1:]
    t = p.reshape((2,) * n + batch)
    for q, (e01, e10) in enumerate(noise.readout):
        if e01 == 0.0 and e10 == 0.0:
            continue
        m = np.array([[1 - e01, e10], [e01, 1 - e10]])
        t = qsim.apply_matrix_array(t, m, [n - 1 - q])
    return t.reshape(p.shape)


def readout_flip_bits(outcomes: np.ndarray, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """Flip each measured bit independently with its readout error probability."""
    if not noise.has_readout:
        return outcomes
    u = rng.random((len(noise.readout), outcomes.size))
    out = outcomes.copy()
    for q, (e01, e10) in enumerate(noise.readout):
        bit = (outcomes >> q) & 1
        flip = u[q] < np.where(bit == 1, e10, e01)
        out ^= flip.astype(out.dtype) << q
    return out


def _sample_kraus(psi: np.ndarray, n: int, kraus: Sequence[np.ndarray], targets, rng) -> np.ndarray:
    """Per-shot Kraus jump: pick K with probability ||K psi||^2, then renormalize."""
    shots = psi.shape[1]
    k = len(targets)
    order = list(reversed(qsim.vector_axes(n, targets)))
    t = np.moveaxis(psi.reshape((2,) * n + (shots,)), order, range(k))
    front = t.reshape(1 << k, -1, shots)
    reduced = np.einsum("ars,brs->abs", front, front.conj())
    weights = np.stack([np.einsum("ba,abs->s", k.conj().T @ k, reduced).real for k in kraus])
    weights = np.clip(weights, 0.0, None)
    cdf = np.cumsum(weights, axis=0)
    cdf /= cdf[-1]
    choice = (rng.random(shots)[None, :] > cdf).sum(axis=0)
    choice = np.minimum(choice, len(kraus) - 1)
    out = np.empty_like(front)
    for j in np.unique(choice):
        cols = choice == j
        out[:, :, cols] = np.einsum("ab,brs->ars", kraus[j], front[:, :, cols])
    norms = np.sqrt(np.einsum("ars,ars->s", out, out.conj()).real)
    out /= norms
    return np.moveaxis(out.reshape(t.shape), range(k), order).reshape(psi.shape)


def _sample_outcomes(psi: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    probs = np.abs(psi) ** 2
    cdf = np.cumsum(probs, axis=0)
    cdf /= cdf[-1]
    u = rng.random(psi.shape[1])
    idx = (u[None, :] > cdf).sum(axis=0)
    return np.minimum(idx, psi.shape[0] - 1).astype(np.int64)


def trajectory_outcomes(
    circuit: ParameterizedCircuit,
    angles: np.ndarray,
    noise: NoiseModel,
    input_amplitudes: np.ndarray,
    shots: int,
    seed: int,
) -> np.ndarray:
    """Raw per-outcome counts from ``shots`` trajectories, readout flips included.

    Shots are processed in fixed-size chunks, chunk c seeded by (seed, c), so
    the result does not depend on how chunks are scheduled.
    """
    n = circuit.n_qubits
    mats = bound_matrices(circuit, angles)
    lam = noise.two_qubit_depol
    kraus = depolarizing_kraus(lam, 2).ops if lam > 0 else None
    counts = np.zeros(1 << n, dtype=np.int64)
    n_chunks = -(-shots // TRAJECTORY_CHUNK)
    for c in range(n_chunks):
        size = min(TRAJECTORY_CHUNK, shots - c * TRAJECTORY_CHUNK)
        rng = np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), c]))
        psi = np.repeat(input_amplitudes[:, None], size, axis=1)
        for g, u in zip(circuit.gates, mats):
            psi = qsim.apply_unitary_array(psi, n, u, g.targets)
            if g.kind == "CX" and kraus is not None:
                psi = _sample_kraus(psi, n, kraus, g.targets, rng)
        outcomes = readout_flip_bits(_sample_outcomes(psi, rng), noise, rng)
        counts += np.bincount(outcomes, minlength=1 << n)
    return counts


def execute_trajectories(
    circuit: ParameterizedCircuit,
    theta: Sequence[float],
    noise: NoiseModel,
    input: StateVector,
    shots: int,
    seed: int,
) -> CountHistogram:
    angles = gate_angles(circuit, theta)
    if input.n_qubits != circuit.n_qubits:
        raise ArgumentError(f"input has {input.n_qubits} qubits, circuit has {circuit.n_qubits}")
    if not isinstance(shots, (int, np.integer)) or shots < 1:
        raise ArgumentError(f"shots must be a positive integer, got {shots!r}")
    if noise.readout and len(noise.readout) != circuit.n_qubits:
        raise ValidationError("readout entries must match the circuit width")
    counts = trajectory_outcomes(circuit, angles, noise, input.amplitudes, int(shots), int(seed))
    return CountHistogram.from_array(counts)
