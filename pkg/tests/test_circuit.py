import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualqgan import qsim
from dualqgan.circuit import (
    AnsatzSpec,
    Gate,
    ParameterizedCircuit,
    build_ansatz,
    circuit_unitary,
    execute,
    format_angle,
    rotation_matrix,
    to_qasm,
)
from dualqgan.errors import ArgumentError, ValidationError

from oracles import circuit_matrix, parse_qasm, random_state

GOLDEN = Path(__file__).parent / "golden"


def random_circuit(n, n_gates, rng, kinds=("RX", "RY", "RZ", "H", "CX")):
    gates, slot = [], 0
    for _ in range(n_gates):
        kind = kinds[rng.integers(len(kinds))] if n > 1 else kinds[rng.integers(len(kinds) - 1)]
        if kind == "CX":
            a, b = rng.permutation(n)[:2]
            gates.append(Gate("CX", (int(a), int(b))))
        elif kind == "H":
            gates.append(Gate("H", (int(rng.integers(n)),)))
        else:
            gates.append(Gate(kind, (int(rng.integers(n)),), slot))
            slot += 1
    return ParameterizedCircuit(n, tuple(gates), slot)


def test_rotation_examples():
    assert np.allclose(rotation_matrix("RY", 0), np.eye(2))
    assert np.allclose(rotation_matrix("RY", math.pi) @ [1, 0], [0, 1], atol=1e-15)
    assert np.allclose(rotation_matrix("RZ", math.pi / 2) @ rotation_matrix("RZ", -math.pi / 2), np.eye(2))
    with pytest.raises(ArgumentError):
        rotation_matrix("RY", float("nan"))


@settings(max_examples=50, deadline=None)
@given(kind=st.sampled_from(["RX", "RY", "RZ"]), theta=st.floats(-20, 20))
def test_rotations_unitary(kind, theta):
    u = rotation_matrix(kind, theta)
    assert np.allclose(u.conj().T @ u, np.eye(2), atol=1e-12)


def test_gate_validation():
    with pytest.raises(ValidationError):
        Gate("CX", (0, 0))
    with pytest.raises(ValidationError):
        Gate("RY", (0,))
    with pytest.raises(ValidationError):
        Gate("H", (0,), 0)
    with pytest.raises(ValidationError):
        Gate("SWAP", (0, 1))


def test_circuit_validation():
    with pytest.raises(ValidationError):
        ParameterizedCircuit(2, (Gate("RY", (0,), 1),), 2)  # slot 0 unused
    with pytest.raises(Exception):
        ParameterizedCircuit(2, (Gate("RY", (2,), 0),), 1)


@pytest.mark.parametrize(
    "spec, n_params, n_ry, n_cx",
    [
        (AnsatzSpec(2, 0, "linear"), 2, 2, 0),
        (AnsatzSpec(3, 2, "linear"), 9, 9, 4),
        (AnsatzSpec(2, 1, "circular"), 4, 4, 1),
        (AnsatzSpec(3, 1, "circular"), 6, 6, 3),
    ],
)
def test_ansatz_counts(spec, n_params, n_ry, n_cx):
    c = build_ansatz(spec)
    assert c.n_params == spec.n_params == n_params
    assert c.count("RY") == n_ry and c.count("CX") == n_cx
    assert build_ansatz(spec) == c


def test_ansatz_spec_limits():
    with pytest.raises(ValidationError):
        AnsatzSpec(0, 1, "linear")
    with pytest.raises(ValidationError):
        AnsatzSpec(2, 65, "linear")
    with pytest.raises(ValidationError):
        AnsatzSpec(2, 1, "star")


def test_execute_examples():
    empty = ParameterizedCircuit(2, (), 0)
    s = qsim.basis_state(2, 3)
    assert np.array_equal(execute(empty, [], s).amplitudes, s.amplitudes)
    one = ParameterizedCircuit(1, (Gate("RY", (0,), 0),), 1)
    assert np.allclose(execute(one, [math.pi], qsim.zero_state(1)).amplitudes, [0, 1], atol=1e-15)
    with pytest.raises(ArgumentError):
        execute(one, [1.0, 2.0], qsim.zero_state(1))


@pytest.mark.parametrize("seed", range(10))
def test_execute_matches_dense_product(seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(3, 12, rng)
    theta = rng.uniform(-np.pi, np.pi, c.n_params)
    psi = random_state(8, rng)
    out = execute(c, theta, qsim.StateVector(3, psi))
    assert np.max(np.abs(out.amplitudes - circuit_matrix(c, theta) @ psi)) < 1e-12


def test_inverse_circuit_gives_identity():
    rng = np.random.default_rng(5)
    c = random_circuit(3, 15, rng)
    theta = rng.uniform(-np.pi, np.pi, c.n_params)
    rev = ParameterizedCircuit(3, tuple(reversed(c.gates)), c.n_params)
    u = circuit_unitary(rev, -theta) @ circuit_unitary(c, theta)
    assert np.allclose(u, np.eye(8), atol=1e-10)


@pytest.mark.parametrize("spec", [AnsatzSpec(2, 2, "linear"), AnsatzSpec(3, 5, "circular"), AnsatzSpec(4, 3, "linear")])
def test_zero_angles_fix_zero_state(spec):
    c = build_ansatz(spec)
    out = execute(c, np.zeros(c.n_params), qsim.zero_state(spec.n_qubits))
    assert np.allclose(out.amplitudes, qsim.zero_state(spec.n_qubits).amplitudes)


def test_qasm_examples():
    text = to_qasm(ParameterizedCircuit(1, (Gate("H", (0,)),), 0), [])
    assert "h q[0];" in text and "measure q[0] -> c[0];" in text
    ry = ParameterizedCircuit(1, (Gate("RY", (0,), 0),), 1)
    assert "ry(1.5707963267949) q[0];" in to_qasm(ry, [math.pi / 2]).splitlines()
    assert format_angle(-0.0) == "0"


@pytest.mark.parametrize("seed", range(10))
def test_qasm_round_trip(seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(4, 20, rng)
    theta = rng.uniform(-10, 10, c.n_params)
    n, gates, measured = parse_qasm(to_qasm(c, theta))
    assert n == 4 and measured == [0, 1, 2, 3]
    assert [(k, t) for k, t, _ in gates] == [(g.kind, g.targets) for g in c.gates]
    for (kind, _, angle), g in zip(gates, c.gates):
        if g.param_slot is not None:
            assert angle == pytest.approx(theta[g.param_slot], rel=1e-14, abs=1e-300)


def test_qasm_golden_default_pqc2():
    text = to_qasm(build_ansatz(AnsatzSpec(3, 5, "linear")), np.zeros(18))
    assert text.encode("utf-8") == (GOLDEN / "pqc2_default_theta0.qasm").read_bytes()
