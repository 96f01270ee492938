import math

import numpy as np
import pytest

from dualqgan.adversary import (
    AdamState,
    Discriminator,
    adam_step,
    disc_backprop,
    disc_forward,
    disc_input_grad,
    disc_predict,
    gan_losses,
)
from dualqgan.errors import ArgumentError, LoadError, NumericError, ValidationError

from oracles import central_diff


def reference_forward(d, x):
    """Plain per-sample loop, independent of the batched implementation."""
    h = np.asarray(x, dtype=float)
    for l, (w, b) in enumerate(zip(d.weights, d.biases)):
        z = np.array([sum(w[i, j] * h[j] for j in range(len(h))) + b[i] for i in range(w.shape[0])])
        h = z if l == len(d.weights) - 1 else np.array([v if v > 0 else 0.01 * v for v in z])
    return 1.0 / (1.0 + math.exp(-h[0]))


def bce(d, batch, labels, c=None):
    c = np.full(len(labels), 1 / len(labels)) if c is None else c
    total = 0.0
    for x, y, ci in zip(batch, labels, c):
        p = reference_forward(d, x)
        total -= ci * (y * math.log(p) + (1 - y) * math.log(1 - p))
    return total


def test_zero_network_outputs_half():
    d = Discriminator.zeros((8, 32, 16, 1))
    assert disc_forward(d, np.full(8, 0.125)) == 0.5


def test_single_linear_layer():
    w = np.zeros((1, 8))
    w[0, 0] = 1
    d = Discriminator((8, 1), (w,), (np.zeros(1),))
    x = np.zeros(8)
    x[0] = 3
    assert disc_forward(d, x) == pytest.approx(1 / (1 + math.exp(-3)), abs=1e-15)
    assert disc_forward(d, x) == pytest.approx(0.95257, abs=1e-5)


def test_output_range_random_draws():
    rng = np.random.default_rng(0)
    for k in range(1000):
        d = Discriminator.init((8, 16, 1), k)
        p = disc_forward(d, rng.normal(scale=3, size=8))
        assert 0 < p < 1


def test_forward_matches_reference_loop():
    rng = np.random.default_rng(1)
    d = Discriminator.init((8, 32, 16, 1), 3)
    x = rng.dirichlet(np.ones(8), size=5)
    assert np.allclose(disc_predict(d, x), [reference_forward(d, xi) for xi in x], atol=1e-14)


def test_nan_input_is_numeric_error():
    with pytest.raises(NumericError):
        disc_forward(Discriminator.zeros((8, 1)), np.full(8, np.nan))


def test_shape_validation():
    with pytest.raises(ValidationError):
        Discriminator((8, 4, 2), (np.zeros((4, 8)), np.zeros((2, 4))), (np.zeros(4), np.zeros(2)))
    with pytest.raises(ValidationError):
        Discriminator((8, 1), (np.zeros((1, 7)),), (np.zeros(1),))
    with pytest.raises(ArgumentError):
        disc_forward(Discriminator.zeros((8, 1)), np.zeros(4))


def test_losses_constant_half():
    d = Discriminator.zeros((8, 4, 1))
    ld, lg = gan_losses(d, np.eye(8)[:3], np.eye(8)[3:5])
    assert ld == pytest.approx(2 * math.log(2), abs=1e-15)
    assert lg == pytest.approx(math.log(2), abs=1e-15)


def test_losses_perfect_discriminator():
    w = np.zeros((1, 2))
    w[0, 0] = 1e3
    d = Discriminator((2, 1), (w,), (np.array([-500.0]),))
    ld, _ = gan_losses(d, [[1.0, 0.0]], [[0.0, 1.0]])
    assert ld < 1e-10
    # clamping keeps the generator loss finite even though D(fake) underflows
    assert math.isfinite(gan_losses(d, [[1.0, 0.0]], [[0.0, 1.0]])[1])


def test_losses_vs_scalar_recomputation():
    rng = np.random.default_rng(2)
    d = Discriminator.init((8, 32, 16, 1), 5)
    real = rng.dirichlet(np.ones(8), size=4)
    fake = rng.dirichlet(np.ones(8), size=3)
    ld, lg = gan_losses(d, real, fake)
    pr = [reference_forward(d, x) for x in real]
    pf = [reference_forward(d, x) for x in fake]
    assert ld == pytest.approx(-np.mean(np.log(pr)) - np.mean(np.log(1 - np.array(pf))), rel=1e-12)
    assert lg == pytest.approx(-np.mean(np.log(pf)), rel=1e-12)


@pytest.mark.parametrize("seed", range(50))
def test_backprop_vs_finite_differences(seed):
    rng = np.random.default_rng(seed)
    sizes = (8, 16, 8, 1)
    d = Discriminator.init(sizes, seed)
    d = d.with_params([p + rng.normal(scale=0.1, size=p.shape) for p in d.params()])  # nonzero biases
    batch = rng.dirichlet(np.ones(8), size=6) * 4
    labels = rng.integers(0, 2, 6).astype(float)
    c = rng.uniform(0.1, 1, 6)
    grads = disc_backprop(d, batch, labels, c)
    params = d.params()
    assert [g.shape for g in grads.params] == [p.shape for p in params]
    assert grads.loss == pytest.approx(bce(d, batch, labels, c), rel=1e-12)
    for k, p in enumerate(params):

        def f(v, k=k):
            ps = list(params)
            ps[k] = v
            return disc_backprop(d.with_params(ps), batch, labels, c).loss

        fd = central_diff(f, p, 1e-6)
        scale = max(np.max(np.abs(fd)), 1e-3)
        assert np.max(np.abs(grads.params[k] - fd)) / scale < 1e-6


def test_backprop_stationary_point():
    d = Discriminator.zeros((8, 16, 1))
    x = np.tile(np.full(8, 0.125), (4, 1))
    grads = disc_backprop(d, x, [1, 0, 1, 0])
    assert all(np.allclose(g, 0, atol=1e-15) for g in grads.params)


def test_input_gradient_vs_finite_differences():
    rng = np.random.default_rng(3)
    d = Discriminator.init((8, 32, 16, 1), 9)
    x = rng.dirichlet(np.ones(8), size=3)
    c = np.array([0.2, 0.5, 0.3])
    g = disc_input_grad(d, x, c)
    fd = central_diff(lambda v: float(c @ np.log(disc_predict(d, v))), x, 1e-6)
    assert np.allclose(g, fd, atol=1e-7)


def test_adam_zero_gradient():
    p = [np.array([1.0, -2.0])]
    st = AdamState.create(p, 0.01)
    new_p, st2 = adam_step(p, [np.zeros(2)], st)
    assert np.array_equal(new_p[0], p[0]) and st2.step == 1


def test_adam_first_step_is_sign():
    p = [np.array([0.5, 0.5, 0.5])]
    g = np.array([3.0, -0.2, 1e-3])
    new_p, _ = adam_step(p, [g], AdamState.create(p, 0.01))
    assert np.allclose(new_p[0] - p[0], -0.01 * np.sign(g), rtol=1e-4)


def test_adam_deterministic_and_nan():
    p = [np.ones(3)]
    st = AdamState.create(p, 0.01)
    a = adam_step(p, [np.arange(3.0)], st)
    b = adam_step(p, [np.arange(3.0)], st)
    assert np.array_equal(a[0][0], b[0][0])
    assert np.array_equal(a[1].m[0], b[1].m[0]) and np.array_equal(a[1].v[0], b[1].v[0])
    with pytest.raises(NumericError):
        adam_step(p, [np.array([0, np.nan, 0])], st)
    with pytest.raises(ArgumentError):
        adam_step(p, [np.zeros(2)], st)


def test_adam_defaults():
    st = AdamState.create([np.zeros(1)], 0.001)
    assert (st.beta1, st.beta2, st.eps, st.step) == (0.9, 0.999, 1e-8, 0)


def test_discriminator_separates_linearly_separable_sets():
    rng = np.random.default_rng(4)
    left = rng.dirichlet(np.r_[np.full(4, 5.0), np.full(4, 0.5)], size=16)
    right = rng.dirichlet(np.r_[np.full(4, 0.5), np.full(4, 5.0)], size=16)
    x = np.vstack([left, right])
    y = np.r_[np.ones(16), np.zeros(16)]
    d = Discriminator.init((8, 32, 16, 1), 0)
    st = AdamState.create(d.params(), 0.01)
    for _ in range(500):
        params, st = adam_step(d.params(), disc_backprop(d, x, y).params, st)
        d = d.with_params(params)
    assert np.all((disc_predict(d, x) > 0.5) == (y == 1))


def test_checkpoint_round_trip(tmp_path):
    d = Discriminator.init((8, 32, 16, 1), 1)
    d.save(tmp_path / "d.json")
    back = Discriminator.load(tmp_path / "d.json")
    assert all(np.array_equal(a, b) for a, b in zip(back.params(), d.params()))
    (tmp_path / "bad.json").write_text('{"layer_sizes": [8, 1]}')
    with pytest.raises(LoadError):
        Discriminator.load(tmp_path / "bad.json")
