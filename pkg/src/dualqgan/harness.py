"""Training loop, repeated-inference protocol and noise scans."""
from __future__ import annotations

import itertools
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import metrics
from .adversary import AdamState, Discriminator, adam_step, disc_backprop, disc_input_grad, disc_predict
from .circuit import AnsatzSpec
from .data import ImageDataset, dataset_mean, synth_calorimeter
from .errors import ArgumentError, ConfigError, DualQGANError, NumericError, ParseError
from .generator import (
    EXACT,
    DualGenerator,
    GeneratedOutput,
    Mode,
    OutputGradient,
    derive_seed,
    generate,
    parameter_shift_grad,
    sample_image_batch,
)
from .metrics import MetricsRecord
from .noise import NoiseModel

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Seeds:
    data: int = 0
    init: int = 0
    shots: int = 0


@dataclass(frozen=True)
class DataConfig:
    n_classes: int = 4
    jitter: float = 0.1
    samples_per_class: int = 16


@dataclass(frozen=True)
class TrainingConfig:
    ansatz1: AnsatzSpec = AnsatzSpec(2, 2, "linear")
    ansatz2: AnsatzSpec = AnsatzSpec(3, 5, "linear")
    disc_layers: tuple[int, ...] = (8, 32, 16, 1)
    epochs: int = 300
    batch: int = 16
    lr_gen: float = 0.01
    lr_disc: float = 0.001
    beta1: float = 0.5
    disc_steps: int = 1
    lr_gen_final: float | None = 0.001
    lr_disc_final: float | None = None
    stratified: bool = True
    image_weighting: str = "uniform"
    shots: int | None = None
    noise: NoiseModel = NoiseModel()
    seeds: Seeds = Seeds()
    eval_every: int = 10
    data: DataConfig = DataConfig()

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch < 1:
            raise ConfigError("batch must be >= 1")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")
        if self.ansatz2.n_qubits < self.ansatz1.n_qubits:
            raise ConfigError("n2 must be >= n1")
        if self.disc_layers[0] != 1 << self.ansatz2.n_qubits or self.disc_layers[-1] != 1:
            raise ConfigError("discriminator must map 2**n2 pixels to one output")
        if self.shots is not None and self.shots < 1:
            raise ConfigError("shots must be >= 1")
        if self.lr_gen <= 0 or self.lr_disc <= 0:
            raise ConfigError("learning rates must be positive")
        if not 0.0 <= self.beta1 < 1.0:
            raise ConfigError("beta1 must be in [0, 1)")
        if self.disc_steps < 1:
            raise ConfigError("disc_steps must be >= 1")
        if self.image_weighting not in ("mixture", "uniform"):
            raise ConfigError("image_weighting must be 'mixture' or 'uniform'")

    @property
    def n1(self) -> int:
        return self.ansatz1.n_qubits

    @property
    def n2(self) -> int:
        return self.ansatz2.n_qubits

    @property
    def mode(self) -> Mode:
        return EXACT if self.shots is None else Mode(self.shots, self.seeds.shots)

    def to_dict(self) -> dict:
        return {
            "n1": self.n1,
            "n2": self.n2,
            "ansatz1": self.ansatz1.to_dict(),
            "ansatz2": self.ansatz2.to_dict(),
            "disc_layers": list(self.disc_layers),
            "epochs": self.epochs,
            "batch": self.batch,
            "lr_gen": self.lr_gen,
            "lr_disc": self.lr_disc,
            "beta1": self.beta1,
            "disc_steps": self.disc_steps,
            "lr_gen_final": self.lr_gen_final,
            "lr_disc_final": self.lr_disc_final,
            "stratified": self.stratified,
            "image_weighting": self.image_weighting,
            "shots": self.shots,
            "noise": self.noise.to_dict(),
            "seeds": asdict(self.seeds),
            "eval_every": self.eval_every,
            "data": asdict(self.data),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingConfig":
        known = set(cls().to_dict())
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            kw = {}
            if "ansatz1" in d:
                kw["ansatz1"] = AnsatzSpec.from_dict(d["ansatz1"])
            elif "n1" in d:
                kw["ansatz1"] = replace(cls.ansatz1, n_qubits=int(d["n1"]))
            if "ansatz2" in d:
                kw["ansatz2"] = AnsatzSpec.from_dict(d["ansatz2"])
            elif "n2" in d:
                kw["ansatz2"] = replace(cls.ansatz2, n_qubits=int(d["n2"]))
            for key in ("n1", "n2"):
                spec = kw.get(f"ansatz{key[1]}", getattr(cls, f"ansatz{key[1]}"))
                if key in d and int(d[key]) != spec.n_qubits:
                    raise ConfigError(f"{key} disagrees with ansatz{key[1]}.n_qubits")
            if "disc_layers" in d:
                kw["disc_layers"] = tuple(int(x) for x in d["disc_layers"])
            elif "ansatz2" in kw:
                kw["disc_layers"] = (1 << kw["ansatz2"].n_qubits,) + cls.disc_layers[1:]
            for key in ("epochs", "batch", "eval_every", "disc_steps"):
                if key in d:
                    kw[key] = int(d[key])
            for key in ("lr_gen", "lr_disc", "beta1"):
                if key in d:
                    kw[key] = float(d[key])
            for key in ("lr_gen_final", "lr_disc_final"):
                if key in d:
                    kw[key] = None if d[key] is None else float(d[key])
            if "image_weighting" in d:
                kw["image_weighting"] = str(d["image_weighting"])
            if "stratified" in d:
                kw["stratified"] = bool(d["stratified"])
            if d.get("shots") is not None:
                kw["shots"] = int(d["shots"])
            if "noise" in d:
                kw["noise"] = NoiseModel.from_dict(d["noise"])
            if "seeds" in d:
                kw["seeds"] = Seeds(**{k: int(v) for k, v in d["seeds"].items()})
            if "data" in d:
                kw["data"] = DataConfig(**d["data"])
            return cls(**kw)
        except ConfigError:
            raise
        except (DualQGANError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "TrainingConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def make_dataset(self) -> ImageDataset:
        return synth_calorimeter(
            self.data.n_classes, 1 << self.n2, self.data.jitter, self.data.samples_per_class, self.seeds.data
        )


@dataclass
class RunResult:
    history: list[MetricsRecord]
    generator: DualGenerator
    discriminator: Discriminator
    wall_time: float
    config: TrainingConfig = field(repr=False, default=None)

    @property
    def final(self) -> MetricsRecord:
        return self.history[-1]


def reference_images(dataset: ImageDataset) -> tuple[np.ndarray, list[np.ndarray]]:
    """Real mean image and the per-class mean images used as real individuals."""
    return dataset_mean(dataset), dataset.class_means()


def evaluate_generator(
    gen: DualGenerator, dataset: ImageDataset, noise: NoiseModel, mode: Mode = EXACT, epoch: int = 0
) -> MetricsRecord:
    real_mean, real_ind = reference_images(dataset)
    return metrics.evaluate(generate(gen, noise, mode), real_mean, real_ind, epoch)


def generator_objective(disc: Discriminator, weighting: str = "mixture"):
    """Non-saturating generator loss f = -sum_i c_i ln D(I_i).

    ``c = w`` (the mixture weights) gives the usual expected loss and drives
    PQC1. ``c = 1/n`` scores every variant equally; used for PQC2 it keeps a
    variant whose weight has collapsed learning to look real.
    """

    def fn(out: GeneratedOutput) -> tuple[float, OutputGradient]:
        log_d = np.log(np.clip(disc_predict(disc, out.individuals), 1e-12, 1 - 1e-12))
        if weighting == "mixture":
            coeffs = out.weights
            grad_w = -log_d
        else:
            coeffs = np.full_like(out.weights, 1.0 / out.weights.size)
            grad_w = np.zeros_like(out.weights)
        return -float(coeffs @ log_d), OutputGradient(
            weights=grad_w,
            individuals=-disc_input_grad(disc, out.individuals, coeffs),
        )

    return fn


def _fake_batch(gen: DualGenerator, cfg: TrainingConfig, step: int, k: int = 0):
    """Fake images plus their loss weights for one discriminator step."""
    if cfg.shots is None:
        out = generate(gen, cfg.noise, EXACT)
        return out.individuals, out.weights
    imgs = sample_image_batch(gen, cfg.noise, cfg.batch, cfg.shots, derive_seed(cfg.seeds.shots, step, 0, k))
    return np.array(imgs), np.full(cfg.batch, 1.0 / cfg.batch)


def _epoch_order(dataset: ImageDataset, rng: np.random.Generator, stratified: bool) -> np.ndarray:
    """Shuffled sample order; ``stratified`` interleaves classes round-robin."""
    if not stratified:
        return rng.permutation(len(dataset))
    per_class = [rng.permutation(np.flatnonzero(dataset.class_ids == c)) for c in range(dataset.n_classes)]
    per_class = [p for p in per_class if p.size]
    out = []
    for k in range(max(p.size for p in per_class)):
        out.extend(int(p[k]) for p in per_class if k < p.size)
    return np.array(out)


def _decayed_lr(start: float, final: float | None, epoch: int, epochs: int) -> float:
    """Geometric interpolation from ``start`` at epoch 1 to ``final`` at the last epoch."""
    if final is None or epochs == 1:
        return start
    return start * (final / start) ** ((epoch - 1) / (epochs - 1))


def train(config: TrainingConfig, dataset: ImageDataset) -> RunResult:
    """Alternate one discriminator and one generator Adam step per minibatch."""
    if dataset.pixels != 1 << config.n2:
        raise ConfigError(f"dataset has {dataset.pixels} pixels, generator produces {1 << config.n2}")
    start = time.perf_counter()
    gen = DualGenerator.random(config.ansatz1, config.ansatz2, config.seeds.init)
    disc = Discriminator.init(config.disc_layers, derive_seed(config.seeds.init, 1))
    opt_g = AdamState.create([gen.theta1, gen.theta2], config.lr_gen, beta1=config.beta1)
    opt_d = AdamState.create(disc.params(), config.lr_disc, beta1=config.beta1)
    rng = np.random.default_rng(config.seeds.data)
    images = dataset.images
    history: list[MetricsRecord] = []
    step = 0
    for epoch in range(1, config.epochs + 1):
        order = _epoch_order(dataset, rng, config.stratified)
        opt_g = replace(opt_g, lr=_decayed_lr(config.lr_gen, config.lr_gen_final, epoch, config.epochs))
        opt_d = replace(opt_d, lr=_decayed_lr(config.lr_disc, config.lr_disc_final, epoch, config.epochs))
        for lo in range(0, len(order), config.batch):
            real = images[order[lo : lo + config.batch]]
            for k in range(config.disc_steps):
                fakes, fake_w = _fake_batch(gen, config, step, k)
                x = np.vstack([real, fakes])
                labels = np.concatenate([np.ones(len(real)), np.zeros(len(fakes))])
                weights = np.concatenate([np.full(len(real), 1.0 / len(real)), fake_w])
                grads = disc_backprop(disc, x, labels, weights)
                if not np.isfinite(grads.loss):
                    raise NumericError(f"non-finite discriminator loss at epoch {epoch}")
                params, opt_d = adam_step(disc.params(), grads.params, opt_d)
                disc = disc.with_params(params)

            mode = config.mode.derive(step, 1)
            try:
                g1 = parameter_shift_grad(gen, config.noise, generator_objective(disc), "theta1", mode)
                g2 = parameter_shift_grad(
                    gen, config.noise, generator_objective(disc, config.image_weighting), "theta2", mode
                )
            except NumericError as exc:
                raise NumericError(f"epoch {epoch}: {exc}") from exc
            (t1, t2), opt_g = adam_step([gen.theta1, gen.theta2], [g1, g2], opt_g)
            gen = gen.with_params(t1, t2)
            step += 1
        if epoch % config.eval_every == 0 or epoch == config.epochs:
            rec = evaluate_generator(gen, dataset, config.noise, EXACT, epoch)
            history.append(rec)
            log.info("epoch %d d_kl=%.4g d_kl_ind=%.4g tv=%.3f", epoch, rec.d_kl, rec.d_kl_ind, rec.min_pairwise_tv)
    return RunResult(history, gen, disc, time.perf_counter() - start, config)


# --------------------------------------------------------------------------
# repeated inference


@dataclass(frozen=True)
class InferenceReport:
    d_kl: tuple[float, ...]
    d_kl_ind: tuple[float, ...]
    noise: NoiseModel
    shots: int | None
    seed: int

    @property
    def repetitions(self) -> int:
        return len(self.d_kl)

    @property
    def d_kl_stats(self) -> tuple[float, float]:
        return metrics.summarize_repetitions(self.d_kl)

    @property
    def d_kl_ind_stats(self) -> tuple[float, float]:
        return metrics.summarize_repetitions(self.d_kl_ind)

    def table_row(self) -> dict:
        """Both metrics as "mean ± std" in units of 10^-2."""
        return {
            "d_kl": metrics.format_scaled(*self.d_kl_stats),
            "d_kl_ind": metrics.format_scaled(*self.d_kl_ind_stats),
        }

    def to_dict(self) -> dict:
        (m, s), (mi, si) = self.d_kl_stats, self.d_kl_ind_stats
        return {
            "repetitions": self.repetitions,
            "shots": self.shots,
            "seed": self.seed,
            "noise": self.noise.to_dict(),
            "d_kl": {"mean": m, "std": s, "values": list(self.d_kl)},
            "d_kl_ind": {"mean": mi, "std": si, "values": list(self.d_kl_ind)},
            "table_units": 1e-2,
            "table": self.table_row(),
        }


def default_dataset(pixels: int, seed: int = 0) -> ImageDataset:
    d = DataConfig()
    return synth_calorimeter(d.n_classes, pixels, d.jitter, d.samples_per_class, seed)


def _as_generator(checkpoint) -> DualGenerator:
    if isinstance(checkpoint, DualGenerator):
        return checkpoint
    return DualGenerator.load(checkpoint)


def inference_test(
    checkpoint,
    noise: NoiseModel,
    repetitions: int = 20,
    mode: Mode = EXACT,
    dataset: ImageDataset | None = None,
) -> InferenceReport:
    """Generate and score ``repetitions`` times with a fresh shot seed per repetition.

    ``checkpoint`` is a DualGenerator or a path to its JSON checkpoint.
    """
    if repetitions < 2:
        raise ArgumentError("need at least two repetitions")
    gen = _as_generator(checkpoint)
    dataset = default_dataset(gen.n_pixels) if dataset is None else dataset
    if dataset.pixels != gen.n_pixels:
        raise ConfigError(f"dataset has {dataset.pixels} pixels, generator produces {gen.n_pixels}")
    real_mean, real_ind = reference_images(dataset)
    d_kl, d_kl_ind = [], []
    for rep in range(repetitions):
        out = generate(gen, noise, mode.derive(rep))
        rec = metrics.evaluate(out, real_mean, real_ind)
        d_kl.append(rec.d_kl)
        d_kl_ind.append(rec.d_kl_ind)
    return InferenceReport(tuple(d_kl), tuple(d_kl_ind), noise, mode.shots, mode.seed)


# --------------------------------------------------------------------------
# noise scans

SCAN_HEADER = "depol,readout,seed,d_kl,d_kl_ind,min_pairwise_tv,collapsed"


@dataclass(frozen=True)
class ScanRow:
    depol: float
    readout: float
    seed: int
    record: MetricsRecord

    def to_csv_row(self) -> str:
        r = self.record
        return (
            f"{self.depol!r},{self.readout!r},{self.seed},{r.d_kl!r},{r.d_kl_ind!r},"
            f"{r.min_pairwise_tv!r},{str(r.collapsed).lower()}"
        )

    @classmethod
    def from_csv_row(cls, row: str, line: int | None = None) -> "ScanRow":
        parts = row.strip().split(",")
        if len(parts) != 7:
            raise ParseError(f"expected 7 columns, got {len(parts)}", line)
        try:
            depol, readout, seed = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ParseError(str(exc), line) from exc
        rec = MetricsRecord.from_csv_row(",".join(["0", *parts[3:]]), line)
        return cls(depol, readout, seed, rec)


def write_scan_csv(rows: Sequence[ScanRow]) -> str:
    return "\n".join([SCAN_HEADER, *(r.to_csv_row() for r in rows)]) + "\n"


def read_scan_csv(text: str) -> list[ScanRow]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != SCAN_HEADER:
        raise ParseError("scan CSV header mismatch", 1)
    return [ScanRow.from_csv_row(row, i) for i, row in enumerate(lines[1:], start=2) if row.strip()]


def noise_scan(
    source,
    lambda_grid: Sequence[float],
    readout_grid: Sequence[float] = (0.0,),
    seeds: Sequence[int] = (0,),
    train_under_noise: bool = False,
    shots: int | None = None,
    dataset: ImageDataset | None = None,
) -> list[ScanRow]:
    """One row per (lambda, readout, seed), sorted in that order.

    ``source`` is a checkpoint (DualGenerator or path) or a TrainingConfig.
    With a checkpoint every row is an inference run; the seed picks the shot
    stream (``shots``) and is irrelevant in exact mode. With a config and
    ``train_under_noise`` every row trains from scratch under the grid noise
    with ``seeds.init = seed``; without it each seed trains once under the
    config noise and is then scored under every grid point.
    """
    lambda_grid, readout_grid, seeds = sorted(lambda_grid), sorted(readout_grid), sorted(seeds)
    if not lambda_grid or not readout_grid or not seeds:
        raise ArgumentError("scan grids and seed list must be nonempty")
    if isinstance(source, TrainingConfig):
        config = source
        if dataset is None:
            dataset = config.make_dataset()
        n2 = config.n2
    else:
        if train_under_noise:
            raise ArgumentError("train_under_noise needs a TrainingConfig, not a checkpoint")
        config = None
        gen = _as_generator(source)
        n2 = gen.n2
        if dataset is None:
            dataset = default_dataset(gen.n_pixels)
    real_mean, real_ind = reference_images(dataset)

    trained: dict[int, DualGenerator] = {}

    def generator_for(seed: int) -> DualGenerator:
        if config is None:
            return gen
        if seed not in trained:
            cfg = replace(config, seeds=replace(config.seeds, init=seed))
            trained[seed] = train(cfg, dataset).generator
        return trained[seed]

    rows = []
    for lam, eps, seed in itertools.product(lambda_grid, readout_grid, seeds):
        noise = NoiseModel.uniform(lam, eps, n2)
        if train_under_noise:
            cfg = replace(config, noise=noise, seeds=replace(config.seeds, init=seed))
            rec = train(cfg, dataset).final
        else:
            mode = EXACT if shots is None else Mode(shots, derive_seed(seed, 0))
            out = generate(generator_for(seed), noise, mode)
            rec = metrics.evaluate(out, real_mean, real_ind)
        rows.append(ScanRow(float(lam), float(eps), int(seed), rec))
    return rows
