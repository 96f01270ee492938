"""Relative-entropy metrics, mode-collapse diagnostic and repetition statistics.

All divergences are in nats and taken generated || real unless a function's
``direction`` is set to "real||generated".
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ArgumentError, ParseError
from .generator import GeneratedOutput, OutputGradient, ScalarFn

DEFAULT_EPS = 1e-8
COLLAPSE_TV = 0.05
DIRECTIONS = ("generated||real", "real||generated")

CSV_HEADER = "epoch,d_kl,d_kl_ind,min_pairwise_tv,collapsed"


def _pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise ArgumentError(f"distributions must be 1-D of equal length, got {p.shape} and {q.shape}")
    return p, q


def _smooth(p: np.ndarray, eps: float) -> np.ndarray:
    return (p + eps) / (1.0 + p.size * eps)


def kl_divergence(p, q, eps: float = DEFAULT_EPS) -> float:
    """KL(p || q) after additive eps-smoothing and renormalization of both sides."""
    p, q = _pair(p, q)
    if eps <= 0:
        raise ArgumentError("eps must be positive")
    ps, qs = _smooth(p, eps), _smooth(q, eps)
    return max(0.0, float(np.sum(ps * np.log(ps / qs))))


def kl_divergence_grad(p, q, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Gradient of ``kl_divergence(p, q)`` with respect to p."""
    p, q = _pair(p, q)
    ps, qs = _smooth(p, eps), _smooth(q, eps)
    return (np.log(ps / qs) + 1.0) / (1.0 + p.size * eps)


def _directed(gen, real, direction: str) -> float:
    if direction == DIRECTIONS[0]:
        return kl_divergence(gen, real)
    if direction == DIRECTIONS[1]:
        return kl_divergence(real, gen)
    raise ArgumentError(f"direction must be one of {DIRECTIONS}, got {direction!r}")


def d_kl_mean(gen_mean, real_mean, direction: str = DIRECTIONS[0]) -> float:
    return _directed(gen_mean, real_mean, direction)


def kl_mean_objective(real_mean) -> ScalarFn:
    """Scalar functional f(out) = D_KL(mean image || real_mean), for the shift rule."""
    real_mean = np.asarray(real_mean, dtype=np.float64)

    def fn(out: GeneratedOutput) -> tuple[float, OutputGradient]:
        return (
            kl_divergence(out.mean_image, real_mean),
            OutputGradient(mean_image=kl_divergence_grad(out.mean_image, real_mean)),
        )

    return fn


def d_kl_individual(gen: GeneratedOutput, real_individuals: Sequence, direction: str = DIRECTIONS[0]) -> float:
    """Mixture-weighted divergence of each generated image to its best real match."""
    reals = [np.asarray(r, dtype=np.float64) for r in real_individuals]
    if not reals:
        raise ArgumentError("real individual set is empty")
    total = 0.0
    for w, img in zip(gen.weights, gen.individuals):
        total += w * min(_directed(img, r, direction) for r in reals)
    return max(0.0, float(total))


def total_variation(p, q) -> float:
    p, q = _pair(p, q)
    return 0.5 * float(np.abs(p - q).sum())


def mode_collapse_score(individuals: Sequence, threshold: float = COLLAPSE_TV) -> tuple[float, bool]:
    imgs = [np.asarray(x, dtype=np.float64) for x in individuals]
    if len(imgs) < 2:
        raise ArgumentError("mode collapse needs at least two individual images")
    tv = min(total_variation(a, b) for a, b in itertools.combinations(imgs, 2))
    tv = min(1.0, tv)
    return tv, tv < threshold


def summarize_repetitions(values: Sequence[float]) -> tuple[float, float]:
    """Arithmetic mean and sample (n - 1) standard deviation."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise ArgumentError("need at least two repetitions")
    if np.all(v == v[0]):
        # identical repetitions (exact mode); avoid round-off in the mean
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1))


def format_scaled(mean: float, std: float, scale: float = 1e-2, digits: int = 2) -> str:
    """Render ``mean ± std`` in units of ``scale``, e.g. "0.07 ± 0.04" for x 10^-2."""
    return f"{mean / scale:.{digits}f} ± {std / scale:.{digits}f}"


@dataclass(frozen=True)
class MetricsRecord:
    epoch: int
    d_kl: float
    d_kl_ind: float
    min_pairwise_tv: float
    collapsed: bool

    def __post_init__(self):
        if self.d_kl < 0 or self.d_kl_ind < 0:
            raise ArgumentError("divergences must be nonnegative")
        if not 0.0 <= self.min_pairwise_tv <= 1.0:
            raise ArgumentError("min_pairwise_tv must lie in [0, 1]")

    def to_csv_row(self) -> str:
        return (
            f"{self.epoch},{self.d_kl!r},{self.d_kl_ind!r},"
            f"{self.min_pairwise_tv!r},{str(self.collapsed).lower()}"
        )

    @classmethod
    def from_csv_row(cls, row: str, line: int | None = None) -> "MetricsRecord":
        parts = row.strip().split(",")
        if len(parts) != 5:
            raise ParseError(f"expected 5 columns, got {len(parts)}", line)
        if parts[4] not in ("true", "false"):
            raise ParseError(f"collapsed must be true/false, got {parts[4]!r}", line)
        try:
            return cls(int(parts[0]), float(parts[1]), float(parts[2]), float(parts[3]), parts[4] == "true")
        except ValueError as exc:
            raise ParseError(str(exc), line) from exc


def evaluate(out: GeneratedOutput, real_mean, real_individuals, epoch: int = 0) -> MetricsRecord:
    tv, collapsed = mode_collapse_score(out.individuals)
    return MetricsRecord(
        epoch=epoch,
        d_kl=d_kl_mean(out.mean_image, real_mean),
        d_kl_ind=d_kl_individual(out, real_individuals),
        min_pairwise_tv=tv,
        collapsed=collapsed,
    )


def write_metrics_csv(records: Sequence[MetricsRecord]) -> str:
    return "\n".join([CSV_HEADER, *(r.to_csv_row() for r in records)]) + "\n"


def read_metrics_csv(text: str) -> list[MetricsRecord]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ParseError("metrics CSV header mismatch", 1)
    return [MetricsRecord.from_csv_row(row, i) for i, row in enumerate(lines[1:], start=2) if row.strip()]
