"""Synthetic reduced-calorimeter images and their CSV format.

Each class is a discretized Gaussian longitudinal profile; samples get
multiplicative log-normal pixel noise and are renormalized.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArgumentError, ParseError, ValidationError

NORMALIZATION_TOL = 1e-6


@dataclass(frozen=True)
class ImageDataset:
    images: np.ndarray  # (n_images, pixels)
    class_ids: np.ndarray
    n_classes: int

    def __post_init__(self):
        images = np.array(self.images, dtype=np.float64)
        ids = np.array(self.class_ids, dtype=np.int64).reshape(-1)
        if images.ndim != 2 or images.shape[0] != ids.size:
            raise ValidationError("need one class id per image")
        if np.any(images < 0) or np.any(np.abs(images.sum(axis=1) - 1.0) > 1e-9):
            raise ValidationError("images must be nonnegative and sum to 1")
        if ids.size and (ids.min() < 0 or ids.max() >= self.n_classes):
            raise ValidationError("class id outside [0, n_classes)")
        images.setflags(write=False)
        ids.setflags(write=False)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "class_ids", ids)

    @property
    def pixels(self) -> int:
        return self.images.shape[1]

    def __len__(self) -> int:
        return self.images.shape[0]

    def class_means(self) -> list[np.ndarray]:
        """Average image of every class present, in class order."""
        return [self.images[self.class_ids == c].mean(axis=0) for c in range(self.n_classes) if np.any(self.class_ids == c)]


def bump_profile(c: int, n_classes: int, pixels: int) -> np.ndarray:
    centre = (c + 0.5) * pixels / n_classes - 0.5
    sigma = pixels / 8
    x = np.arange(pixels)
    prof = np.exp(-((x - centre) ** 2) / (2 * sigma**2))
    return prof / prof.sum()


def synth_calorimeter(
    n_classes: int = 4, pixels: int = 8, jitter: float = 0.1, samples_per_class: int = 16, seed: int = 0
) -> ImageDataset:
    if not 1 <= n_classes <= pixels:
        raise ArgumentError(f"need 1 <= n_classes <= pixels, got {n_classes}, {pixels}")
    if pixels < 2:
        raise ArgumentError("need at least two pixels")
    if not 0.0 <= jitter <= 0.5:
        raise ArgumentError(f"jitter must be in [0, 0.5], got {jitter}")
    if samples_per_class < 1:
        raise ArgumentError("samples_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    images, ids = [], []
    for c in range(n_classes):
        base = bump_profile(c, n_classes, pixels)
        for _ in range(samples_per_class):
            img = base * np.exp(jitter * rng.standard_normal(pixels)) if jitter > 0 else base.copy()
            images.append(img / img.sum())
            ids.append(c)
    return ImageDataset(np.array(images), np.array(ids), n_classes)


def dataset_mean(d: ImageDataset) -> np.ndarray:
    if len(d) == 0:
        raise ArgumentError("dataset is empty")
    m = d.images.mean(axis=0)
    return m / m.sum()


def to_csv(d: ImageDataset) -> str:
    header = "class," + ",".join(f"p{k}" for k in range(d.pixels))
    rows = [header]
    for c, img in zip(d.class_ids, d.images):
        rows.append(f"{c}," + ",".join(f"{x:.17g}" for x in img))
    return "\n".join(rows) + "\n"


def save_csv(d: ImageDataset, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(to_csv(d), encoding="utf-8", newline="\n")
    return path


def parse_csv(text: str) -> ImageDataset:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty file", 1)
    header = lines[0].strip().split(",")
    pixels = len(header) - 1
    if pixels < 2 or header != ["class"] + [f"p{k}" for k in range(pixels)]:
        raise ParseError("header must be class,p0,p1,...", 1)
    images, ids = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cols = line.split(",")
        if len(cols) != pixels + 1:
            raise ParseError(f"expected {pixels + 1} columns, got {len(cols)}", lineno)
        try:
            cid = int(cols[0])
            img = np.array([float(x) for x in cols[1:]])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
        if cid < 0:
            raise ParseError("negative class id", lineno)
        if not np.all(np.isfinite(img)) or np.any(img < 0):
            raise ParseError("pixel values must be finite and nonnegative", lineno)
        total = img.sum()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ParseError(f"row sums to {total:.6g}, expected 1", lineno)
        images.append(img / total)
        ids.append(cid)
    if not images:
        raise ParseError("no data rows", len(lines))
    return ImageDataset(np.array(images), np.array(ids), max(ids) + 1)


def load_csv(path: str | Path) -> ImageDataset:
    return parse_csv(Path(path).read_text(encoding="utf-8"))
