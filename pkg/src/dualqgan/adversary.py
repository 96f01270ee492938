"""Classical discriminator, GAN losses, backpropagation and Adam, in plain numpy."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ArgumentError, LoadError, NumericError, ValidationError

LEAKY_SLOPE = 0.01
PROB_CLAMP = 1e-12


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class Discriminator:
    layer_sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...] = field(repr=False)  # weights[l] has shape (out, in)
    biases: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or sizes[-1] != 1 or any(s < 1 for s in sizes):
            raise ValidationError(f"invalid layer sizes {sizes}")
        ws = tuple(np.array(w, dtype=np.float64) for w in self.weights)
        bs = tuple(np.array(b, dtype=np.float64).reshape(-1) for b in self.biases)
        if len(ws) != len(sizes) - 1 or len(bs) != len(ws):
            raise ValidationError("one weight matrix and bias vector per layer required")
        for l, (w, b) in enumerate(zip(ws, bs)):
            if w.shape != (sizes[l + 1], sizes[l]) or b.shape != (sizes[l + 1],):
                raise ValidationError(f"layer {l} shapes {w.shape}, {b.shape} do not chain")
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @classmethod
    def init(cls, layer_sizes: Sequence[int], seed: int) -> "Discriminator":
        """He-normal weights, zero biases."""
        rng = np.random.default_rng(seed)
        sizes = tuple(layer_sizes)
        ws = [rng.normal(0.0, np.sqrt(2.0 / sizes[l]), (sizes[l + 1], sizes[l])) for l in range(len(sizes) - 1)]
        bs = [np.zeros(sizes[l + 1]) for l in range(len(sizes) - 1)]
        return cls(sizes, tuple(ws), tuple(bs))

    @classmethod
    def zeros(cls, layer_sizes: Sequence[int]) -> "Discriminator":
        sizes = tuple(layer_sizes)
        return cls(
            sizes,
            tuple(np.zeros((sizes[l + 1], sizes[l])) for l in range(len(sizes) - 1)),
            tuple(np.zeros(sizes[l + 1]) for l in range(len(sizes) - 1)),
        )

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def with_params(self, params: Sequence[np.ndarray]) -> "Discriminator":
        return replace(self, weights=tuple(params[0::2]), biases=tuple(params[1::2]))

    def to_dict(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "leaky_slope": LEAKY_SLOPE,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Discriminator":
        try:
            return cls(tuple(d["layer_sizes"]), tuple(d["weights"]), tuple(d["biases"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise LoadError(f"invalid discriminator checkpoint: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Discriminator":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise LoadError(f"cannot read discriminator checkpoint {path}: {exc}") from exc


def _as_batch(d: Discriminator, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != d.layer_sizes[0]:
        raise ArgumentError(f"expected inputs of length {d.layer_sizes[0]}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericError("discriminator input contains non-finite values")
    return x


def _forward(d: Discriminator, x: np.ndarray):
    """Returns output probabilities and the per-layer cache for backprop."""
    acts = [x]
    pre = []
    h = x
    last = len(d.weights) - 1
    for l, (w, b) in enumerate(zip(d.weights, d.biases)):
        z = h @ w.T + b
        pre.append(z)
        h = z if l == last else np.where(z > 0, z, LEAKY_SLOPE * z)
        acts.append(h)
    return _sigmoid(pre[-1][:, 0]), (acts, pre)


def _backward(d: Discriminator, cache, dlogit: np.ndarray):
    """Gradients of sum_s dlogit[s] * logit_s w.r.t. params and inputs."""
    acts, pre = cache
    grads_w = [None] * len(d.weights)
    grads_b = [None] * len(d.weights)
    delta = dlogit[:, None]
    for l in range(len(d.weights) - 1, -1, -1):
        grads_w[l] = delta.T @ acts[l]
        grads_b[l] = delta.sum(axis=0)
        delta = delta @ d.weights[l]
        if l > 0:
            delta = delta * np.where(pre[l - 1] > 0, 1.0, LEAKY_SLOPE)
    params = []
    for gw, gb in zip(grads_w, grads_b):
        params.extend((gw, gb))
    return params, delta


def disc_predict(d: Discriminator, images) -> np.ndarray:
    out, _ = _forward(d, _as_batch(d, images))
    return out


def disc_forward(d: Discriminator, image) -> float:
    return float(disc_predict(d, image)[0])


def _clamped_log(p: np.ndarray) -> np.ndarray:
    return np.log(np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP))


def _weights_for(n: int, w) -> np.ndarray:
    if w is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (n,):
        raise ArgumentError("sample weights must match the batch")
    return w


def gan_losses(d: Discriminator, real_batch, fake_batch, fake_weights=None) -> tuple[float, float]:
    """Binary cross-entropy GAN losses with the non-saturating generator loss.

    ``fake_weights`` replaces the uniform batch mean over fakes with a weighted
    one (the exact-mode expectation over generator variants).
    """
    real = disc_predict(d, real_batch)
    fake = disc_predict(d, fake_batch)
    if real.size == 0 or fake.size == 0:
        raise ArgumentError("batches must be nonempty")
    fw = _weights_for(fake.size, fake_weights)
    loss_d = -float(np.mean(_clamped_log(real))) - float(fw @ _clamped_log(1.0 - fake))
    loss_g = -float(fw @ _clamped_log(fake))
    return loss_d, loss_g


@dataclass
class Gradients:
    params: list[np.ndarray]
    loss: float


def disc_backprop(d: Discriminator, batch, labels, sample_weights=None) -> Gradients:
    """Exact gradients of sum_s c_s * BCE(D(x_s), y_s); c_s defaults to 1/batch."""
    x = _as_batch(d, batch)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if y.shape != (x.shape[0],):
        raise ArgumentError("one label per batch element required")
    c = _weights_for(x.shape[0], sample_weights)
    prob, cache = _forward(d, x)
    loss = -float(np.sum(c * (y * _clamped_log(prob) + (1 - y) * _clamped_log(1 - prob))))
    params, _ = _backward(d, cache, c * (prob - y))
    return Gradients(params, loss)


def disc_input_grad(d: Discriminator, images, coeffs) -> np.ndarray:
    """Per-image gradient of sum_s coeffs[s] * ln D(x_s) with respect to x_s."""
    x = _as_batch(d, images)
    prob, cache = _forward(d, x)
    _, dx = _backward(d, cache, np.asarray(coeffs, dtype=np.float64) * (1.0 - prob))
    return dx


@dataclass(frozen=True)
class AdamState:
    m: tuple[np.ndarray, ...]
    v: tuple[np.ndarray, ...]
    step: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def create(cls, params: Sequence[np.ndarray], lr: float, **kw) -> "AdamState":
        zeros = tuple(np.zeros_like(np.asarray(p, dtype=np.float64)) for p in params)
        return cls(zeros, zeros, 0, lr, **kw)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ArgumentError("params, grads and moments must align")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != np.shape(p) or g.shape != m.shape:
            raise ArgumentError(f"gradient shape {g.shape} does not match parameter shape {np.shape(p)}")
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient")
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_p.append(np.asarray(p, dtype=np.float64) - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, replace(state, m=tuple(new_m), v=tuple(new_v), step=t)
