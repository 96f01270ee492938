"""Gates, parameterized circuits, the hardware-efficient ansatz and QASM export."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import qsim
from .errors import ArgumentError, QubitIndexError, SizeError, ValidationError
from .qsim import StateVector

ROTATIONS = ("RX", "RY", "RZ")
GATE_KINDS = ROTATIONS + ("H", "CX")
ENTANGLEMENTS = ("linear", "circular")
MAX_DEPTH = 64

H_MATRIX = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
# local index = control bit + 2 * target bit
CX_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=np.complex128
)


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple[int, ...]
    param_slot: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if self.kind not in GATE_KINDS:
            raise ValidationError(f"unknown gate kind {self.kind!r}")
        if self.kind == "CX":
            if len(self.targets) != 2 or self.targets[0] == self.targets[1]:
                raise ValidationError("CX needs exactly two distinct targets")
            if self.param_slot is not None:
                raise ValidationError("CX takes no parameter")
        else:
            if len(self.targets) != 1:
                raise ValidationError(f"{self.kind} acts on exactly one qubit")
            if (self.kind in ROTATIONS) != (self.param_slot is not None):
                raise ValidationError(f"{self.kind} param_slot mismatch")
        if any(t < 0 for t in self.targets):
            raise QubitIndexError("negative qubit index")

    @property
    def is_rotation(self) -> bool:
        return self.kind in ROTATIONS


@dataclass(frozen=True)
class ParameterizedCircuit:
    n_qubits: int
    gates: tuple[Gate, ...]
    n_params: int

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if not 1 <= self.n_qubits <= qsim.MAX_QUBITS:
            raise SizeError(f"n_qubits out of range: {self.n_qubits}")
        used = set()
        for g in self.gates:
            if any(t >= self.n_qubits for t in g.targets):
                raise QubitIndexError(f"gate {g} addresses a qubit outside {self.n_qubits}")
            if g.param_slot is not None:
                if not 0 <= g.param_slot < self.n_params:
                    raise ValidationError(f"param slot {g.param_slot} out of range")
                used.add(g.param_slot)
        if used != set(range(self.n_params)):
            raise ValidationError("every parameter slot must be used by at least one gate")

    def count(self, kind: str) -> int:
        return sum(g.kind == kind for g in self.gates)


@dataclass(frozen=True)
class AnsatzSpec:
    n_qubits: int
    depth: int
    entanglement: str = "linear"

    def __post_init__(self):
        if not isinstance(self.n_qubits, int) or not 1 <= self.n_qubits <= qsim.MAX_QUBITS:
            raise ValidationError(f"ansatz n_qubits out of range: {self.n_qubits!r}")
        if not isinstance(self.depth, int) or not 0 <= self.depth <= MAX_DEPTH:
            raise ValidationError(f"ansatz depth must be in [0, {MAX_DEPTH}], got {self.depth!r}")
        if self.entanglement not in ENTANGLEMENTS:
            raise ValidationError(f"entanglement must be one of {ENTANGLEMENTS}")

    @property
    def n_params(self) -> int:
        return self.n_qubits * (self.depth + 1)

    def to_dict(self) -> dict:
        return {"n_qubits": self.n_qubits, "depth": self.depth, "entanglement": self.entanglement}

    @classmethod
    def from_dict(cls, d: dict) -> "AnsatzSpec":
        return cls(int(d["n_qubits"]), int(d["depth"]), str(d.get("entanglement", "linear")))


def rotation_matrix(kind: str, theta: float) -> np.ndarray:
    if kind not in ROTATIONS:
        raise ArgumentError(f"not a rotation gate: {kind!r}")
    theta = float(theta)
    if not math.isfinite(theta):
        raise ArgumentError(f"rotation angle must be finite, got {theta!r}")
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    return np.array([[complex(c, -s), 0], [0, complex(c, s)]], dtype=np.complex128)


def gate_matrix(gate: Gate, angle: float | None = None) -> np.ndarray:
    if gate.kind == "CX":
        return CX_MATRIX
    if gate.kind == "H":
        return H_MATRIX
    return rotation_matrix(gate.kind, angle)


def entangling_pairs(n_qubits: int, entanglement: str) -> list[tuple[int, int]]:
    pairs = [(i, i + 1) for i in range(n_qubits - 1)]
    if entanglement == "circular" and n_qubits > 2:
        pairs.append((n_qubits - 1, 0))
    return pairs


def build_ansatz(spec: AnsatzSpec) -> ParameterizedCircuit:
    """RY column, then ``depth`` times: CX pattern followed by another RY column."""
    n = spec.n_qubits
    gates = [Gate("RY", (q,), q) for q in range(n)]
    pairs = entangling_pairs(n, spec.entanglement)
    for layer in range(1, spec.depth + 1):
        gates.extend(Gate("CX", p) for p in pairs)
        gates.extend(Gate("RY", (q,), layer * n + q) for q in range(n))
    return ParameterizedCircuit(n, tuple(gates), spec.n_params)


def _check_theta(circuit: ParameterizedCircuit, theta: Sequence[float]) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.size != circuit.n_params:
        raise ArgumentError(f"expected {circuit.n_params} parameters, got {theta.size}")
    if not np.all(np.isfinite(theta)):
        raise ArgumentError("parameters must be finite")
    return theta


def gate_angles(circuit: ParameterizedCircuit, theta: Sequence[float]) -> np.ndarray:
    """Per-gate angle list (NaN for fixed gates); the unit the shift rule perturbs."""
    theta = _check_theta(circuit, theta)
    angles = np.full(len(circuit.gates), np.nan)
    for i, g in enumerate(circuit.gates):
        if g.param_slot is not None:
            angles[i] = theta[g.param_slot]
    return angles


def bound_matrices(circuit: ParameterizedCircuit, angles: np.ndarray) -> list[np.ndarray]:
    return [gate_matrix(g, a) for g, a in zip(circuit.gates, angles)]


def run_array(circuit: ParameterizedCircuit, angles: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Apply the bound circuit to ``vec`` of shape (2**n, *batch). No validation."""
    n = circuit.n_qubits
    for g, u in zip(circuit.gates, bound_matrices(circuit, angles)):
        vec = qsim.apply_unitary_array(vec, n, u, g.targets)
    return vec


def execute(circuit: ParameterizedCircuit, theta: Sequence[float], input: StateVector) -> StateVector:
    angles = gate_angles(circuit, theta)
    if input.n_qubits != circuit.n_qubits:
        raise ArgumentError(
            f"input has {input.n_qubits} qubits, circuit has {circuit.n_qubits}"
        )
    return StateVector(circuit.n_qubits, run_array(circuit, angles, input.amplitudes))


def circuit_unitary(circuit: ParameterizedCircuit, theta: Sequence[float]) -> np.ndarray:
    """Full 2**n x 2**n matrix; column j is the output for basis input j."""
    angles = gate_angles(circuit, theta)
    return run_array(circuit, angles, np.eye(1 << circuit.n_qubits, dtype=np.complex128))


def format_angle(x: float) -> str:
    s = format(float(x), ".15g")
    return "0" if s in ("-0", "0") else s


def to_qasm(circuit: ParameterizedCircuit, theta: Sequence[float]) -> str:
    """OpenQASM 2.0 text with bound angles and a trailing per-qubit measurement."""
    angles = gate_angles(circuit, theta)
    n = circuit.n_qubits
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{n}];", f"creg c[{n}];"]
    for g, a in zip(circuit.gates, angles):
        if g.kind == "CX":
            lines.append(f"cx q[{g.targets[0]}],q[{g.targets[1]}];")
        elif g.kind == "H":
            lines.append(f"h q[{g.targets[0]}];")
        else:
            lines.append(f"{g.kind.lower()}({format_angle(a)}) q[{g.targets[0]}];")
    lines.extend(f"measure q[{q}] -> c[{q}];" for q in range(n))
    return "\n".join(lines) + "\n"
