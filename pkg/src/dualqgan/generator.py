"""The dual-PQC generator.

PQC1 on n1 qubits yields a distribution over 2**n1 variants. PQC2 on n2 qubits
maps basis input |i> (i on the low n1 qubits, the rest |0>) to the pixel
distribution of individual image I_i. The two stages are coupled through a
computational-basis measurement, so the mean image is the mixture
sum_i w_i I_i.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import qsim
from .circuit import AnsatzSpec, ParameterizedCircuit, build_ansatz, gate_angles, run_array
from .errors import ArgumentError, LoadError, NumericError, ValidationError
from .noise import NoiseModel, apply_readout, run_density_array, trajectory_outcomes

SHIFT = math.pi / 2


@dataclass(frozen=True)
class Mode:
    """Exact probabilities (``shots is None``) or shot estimates from trajectories."""

    shots: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.shots is not None and (not isinstance(self.shots, (int, np.integer)) or self.shots < 1):
            raise ArgumentError(f"shots must be a positive integer, got {self.shots!r}")

    @property
    def exact(self) -> bool:
        return self.shots is None

    def derive(self, *path: int) -> "Mode":
        """Same shot budget, independent seed for a sub-job."""
        if self.exact:
            return self
        return Mode(self.shots, derive_seed(self.seed, *path))


EXACT = Mode()


def derive_seed(base: int, *path: int) -> int:
    ss = np.random.SeedSequence([int(base) & (2**64 - 1), *(int(p) & (2**64 - 1) for p in path)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class DualGenerator:
    pqc1: ParameterizedCircuit
    pqc2: ParameterizedCircuit
    theta1: np.ndarray = field(repr=False)
    theta2: np.ndarray = field(repr=False)
    ansatz1: AnsatzSpec | None = None
    ansatz2: AnsatzSpec | None = None

    def __post_init__(self):
        if self.pqc2.n_qubits < self.pqc1.n_qubits:
            raise ValidationError("PQC2 must have at least as many qubits as PQC1")
        for name, circ in (("theta1", self.pqc1), ("theta2", self.pqc2)):
            theta = np.array(getattr(self, name), dtype=np.float64).reshape(-1)
            if theta.size != circ.n_params:
                raise ValidationError(f"{name} has {theta.size} entries, circuit needs {circ.n_params}")
            if not np.all(np.isfinite(theta)):
                raise NumericError(f"{name} contains non-finite values")
            theta.setflags(write=False)
            object.__setattr__(self, name, theta)

    @property
    def n1(self) -> int:
        return self.pqc1.n_qubits

    @property
    def n2(self) -> int:
        return self.pqc2.n_qubits

    @property
    def n_variants(self) -> int:
        return 1 << self.n1

    @property
    def n_pixels(self) -> int:
        return 1 << self.n2

    @classmethod
    def from_ansatz(cls, ansatz1: AnsatzSpec, ansatz2: AnsatzSpec, theta1=None, theta2=None) -> "DualGenerator":
        pqc1, pqc2 = build_ansatz(ansatz1), build_ansatz(ansatz2)
        theta1 = np.zeros(pqc1.n_params) if theta1 is None else theta1
        theta2 = np.zeros(pqc2.n_params) if theta2 is None else theta2
        return cls(pqc1, pqc2, theta1, theta2, ansatz1, ansatz2)

    @classmethod
    def random(cls, ansatz1: AnsatzSpec, ansatz2: AnsatzSpec, seed: int, scale: float = math.pi) -> "DualGenerator":
        rng = np.random.default_rng(seed)
        return cls.from_ansatz(
            ansatz1,
            ansatz2,
            rng.uniform(-scale, scale, ansatz1.n_params),
            rng.uniform(-scale, scale, ansatz2.n_params),
        )

    def with_params(self, theta1=None, theta2=None) -> "DualGenerator":
        return DualGenerator(
            self.pqc1,
            self.pqc2,
            self.theta1 if theta1 is None else theta1,
            self.theta2 if theta2 is None else theta2,
            self.ansatz1,
            self.ansatz2,
        )

    def to_dict(self) -> dict:
        if self.ansatz1 is None or self.ansatz2 is None:
            raise ValidationError("only ansatz-built generators can be checkpointed")
        return {
            "n1": self.n1,
            "n2": self.n2,
            "ansatz1": self.ansatz1.to_dict(),
            "ansatz2": self.ansatz2.to_dict(),
            "theta1": self.theta1.tolist(),
            "theta2": self.theta2.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DualGenerator":
        try:
            gen = cls.from_ansatz(
                AnsatzSpec.from_dict(d["ansatz1"]),
                AnsatzSpec.from_dict(d["ansatz2"]),
                np.asarray(d["theta1"], dtype=np.float64),
                np.asarray(d["theta2"], dtype=np.float64),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise LoadError(f"invalid generator checkpoint: {exc}") from exc
        if (gen.n1, gen.n2) != (d.get("n1", gen.n1), d.get("n2", gen.n2)):
            raise LoadError("checkpoint register sizes disagree with its ansatz specs")
        return gen

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DualGenerator":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise LoadError(f"cannot read generator checkpoint {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise LoadError("generator checkpoint must be a JSON object")
        return cls.from_dict(d)


@dataclass(frozen=True)
class GeneratedOutput:
    weights: np.ndarray
    individuals: np.ndarray  # (n_variants, n_pixels)
    mean_image: np.ndarray

    @classmethod
    def assemble(cls, weights: np.ndarray, individuals: np.ndarray) -> "GeneratedOutput":
        return cls(weights, individuals, weights @ individuals)


@dataclass(frozen=True)
class OutputGradient:
    """Gradient of a scalar functional with respect to each part of a GeneratedOutput."""

    weights: np.ndarray | None = None
    individuals: np.ndarray | None = None
    mean_image: np.ndarray | None = None


ScalarFn = Callable[[GeneratedOutput], tuple[float, OutputGradient]]


# --------------------------------------------------------------------------
# stage evaluation on raw per-gate angles


def _weights_from_angles(pqc1: ParameterizedCircuit, angles: np.ndarray, noise: NoiseModel, mode: Mode) -> np.ndarray:
    dim = 1 << pqc1.n_qubits
    if mode.exact:
        if noise.two_qubit_depol == 0.0:
            psi = np.zeros(dim, dtype=np.complex128)
            psi[0] = 1.0
            p = np.abs(run_array(pqc1, angles, psi)) ** 2
        else:
            rho = np.zeros((dim, dim), dtype=np.complex128)
            rho[0, 0] = 1.0
            p = np.diagonal(run_density_array(pqc1, angles, noise.two_qubit_depol, rho)).real
        return qsim.clean_probabilities(apply_readout(p, noise))
    psi = np.zeros(dim, dtype=np.complex128)
    psi[0] = 1.0
    counts = trajectory_outcomes(pqc1, angles, noise, psi, mode.shots, mode.seed)
    return counts / mode.shots


def _individuals_from_angles(
    pqc2: ParameterizedCircuit, angles: np.ndarray, n_variants: int, noise: NoiseModel, mode: Mode, variants=None
) -> np.ndarray:
    """Rows are individual images for the requested variants (default: all)."""
    dim = 1 << pqc2.n_qubits
    variants = range(n_variants) if variants is None else variants
    variants = list(variants)
    if mode.exact:
        if noise.two_qubit_depol == 0.0:
            inputs = np.zeros((dim, len(variants)), dtype=np.complex128)
            inputs[variants, range(len(variants))] = 1.0
            p = np.abs(run_array(pqc2, angles, inputs)) ** 2
        else:
            rho = np.zeros((dim, dim, len(variants)), dtype=np.complex128)
            rho[variants, variants, range(len(variants))] = 1.0
            out = run_density_array(pqc2, angles, noise.two_qubit_depol, rho)
            p = np.einsum("iib->ib", out).real
        p = apply_readout(p, noise)
        p = np.clip(p, 0.0, None)
        return (p / p.sum(axis=0)).T
    rows = []
    for i in variants:
        psi = np.zeros(dim, dtype=np.complex128)
        psi[i] = 1.0
        counts = trajectory_outcomes(pqc2, angles, noise, psi, mode.shots, derive_seed(mode.seed, i))
        rows.append(counts / mode.shots)
    return np.array(rows)


def _noises(gen: DualGenerator, noise: NoiseModel) -> tuple[NoiseModel, NoiseModel]:
    return noise.restricted(gen.n1), noise.restricted(gen.n2)


# --------------------------------------------------------------------------
# public operations


def variant_weights(gen: DualGenerator, noise: NoiseModel = NoiseModel(), mode: Mode = EXACT) -> np.ndarray:
    noise1, _ = _noises(gen, noise)
    return _weights_from_angles(gen.pqc1, gate_angles(gen.pqc1, gen.theta1), noise1, mode.derive(1))


def individual_image(gen: DualGenerator, i: int, noise: NoiseModel = NoiseModel(), mode: Mode = EXACT) -> np.ndarray:
    if not isinstance(i, (int, np.integer)) or not 0 <= i < gen.n_variants:
        raise ArgumentError(f"variant index {i!r} out of range [0, {gen.n_variants})")
    _, noise2 = _noises(gen, noise)
    angles = gate_angles(gen.pqc2, gen.theta2)
    return _individuals_from_angles(gen.pqc2, angles, gen.n_variants, noise2, mode.derive(2), [i])[0]


def generate(gen: DualGenerator, noise: NoiseModel = NoiseModel(), mode: Mode = EXACT) -> GeneratedOutput:
    noise1, noise2 = _noises(gen, noise)
    w = _weights_from_angles(gen.pqc1, gate_angles(gen.pqc1, gen.theta1), noise1, mode.derive(1))
    imgs = _individuals_from_angles(
        gen.pqc2, gate_angles(gen.pqc2, gen.theta2), gen.n_variants, noise2, mode.derive(2)
    )
    return GeneratedOutput.assemble(w, imgs)


def sample_image_batch(
    gen: DualGenerator, noise: NoiseModel, batch: int, shots_per_image: int, seed: int
) -> list[np.ndarray]:
    """Draw variants from the weights, then a shot estimate of each chosen image.

    Shot estimates are multinomial draws from the exact noisy image, which has
    the same law as running that many independent trajectories.
    """
    if batch < 1:
        raise ArgumentError("batch must be >= 1")
    if shots_per_image < 1:
        raise ArgumentError("shots_per_image must be >= 1")
    out = generate(gen, noise, EXACT)
    rng = np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1)]))
    choices = rng.choice(gen.n_variants, size=batch, p=out.weights)
    return [rng.multinomial(shots_per_image, out.individuals[i]) / shots_per_image for i in choices]


def _effective_gradients(out: GeneratedOutput, g: OutputGradient) -> tuple[np.ndarray, np.ndarray]:
    """Fold the mean-image gradient into weight and individual gradients."""
    gw = np.zeros_like(out.weights) if g.weights is None else np.asarray(g.weights, dtype=np.float64)
    gi = np.zeros_like(out.individuals) if g.individuals is None else np.asarray(g.individuals, dtype=np.float64)
    if g.mean_image is not None:
        gm = np.asarray(g.mean_image, dtype=np.float64)
        gw = gw + out.individuals @ gm
        gi = gi + np.outer(out.weights, gm)
    return gw, gi


def parameter_shift_grad(
    gen: DualGenerator,
    noise: NoiseModel,
    scalar_fn: ScalarFn,
    which: str,
    mode: Mode = EXACT,
) -> np.ndarray:
    """d f / d theta via the two-point shift rule on every rotation gate.

    The shift rule gives exact derivatives of each outcome probability; these
    are contracted with the gradient ``scalar_fn`` reports at the unshifted
    output. Gates sharing a slot contribute additively.
    """
    if which not in ("theta1", "theta2"):
        raise ArgumentError("which must be 'theta1' or 'theta2'")
    out = generate(gen, noise, mode)
    value, g = scalar_fn(out)
    gw, gi = _effective_gradients(out, g)
    if not (np.isfinite(value) and np.all(np.isfinite(gw)) and np.all(np.isfinite(gi))):
        raise NumericError("scalar function returned non-finite values")
    noise1, noise2 = _noises(gen, noise)
    stage = 1 if which == "theta1" else 2
    circ = gen.pqc1 if stage == 1 else gen.pqc2
    theta = gen.theta1 if stage == 1 else gen.theta2
    base = gate_angles(circ, theta)
    grad = np.zeros(circ.n_params)

    def evaluate(angles: np.ndarray, m: Mode) -> np.ndarray:
        if stage == 1:
            return _weights_from_angles(circ, angles, noise1, m)
        return _individuals_from_angles(circ, angles, gen.n_variants, noise2, m)

    upstream = gw if stage == 1 else gi
    for j, gate in enumerate(circ.gates):
        if gate.param_slot is None:
            continue
        shifted = []
        for sign, offset in ((0, SHIFT), (1, -SHIFT)):
            angles = base.copy()
            angles[j] += offset
            shifted.append(evaluate(angles, mode.derive(stage, j, sign)))
        grad[gate.param_slot] += 0.5 * float(np.sum(upstream * (shifted[0] - shifted[1])))
    return grad
