import numpy as np
import pytest

from confdiff.errors import InvalidInputError
from confdiff.optim import OptimizerConfig, OptimizerState, init_state, step


def _adam_reference(params, grads, lr, b1, b2, eps, wd, steps):
    """Textbook Adam with L2 decay, one scalar at a time."""
    p = [float(v) for v in params]
    m = [0.0] * len(p)
    v = [0.0] * len(p)
    for t in range(1, steps + 1):
        for i in range(len(p)):
            g = grads[t - 1][i] + wd * p[i]
            m[i] = b1 * m[i] + (1 - b1) * g
            v[i] = b2 * v[i] + (1 - b2) * g * g
            mh = m[i] / (1 - b1 ** t)
            vh = v[i] / (1 - b2 ** t)
            p[i] = p[i] - lr * mh / (vh ** 0.5 + eps)
    return np.array(p)


def test_sgd_step():
    cfg = OptimizerConfig("sgd", learning_rate=0.1, weight_decay=0.0)
    p, g = np.array([1.0, -2.0]), np.array([0.5, 3.0])
    new, st = step(cfg, init_state(cfg, 2), p, g)
    np.testing.assert_array_equal(new, p - 0.1 * g)
    assert st.step == 1


def test_sgd_zero_lr():
    cfg = OptimizerConfig("sgd", learning_rate=0.0)
    p = np.array([1.0, 2.0])
    np.testing.assert_array_equal(step(cfg, init_state(cfg, 2), p, np.array([4.0, 5.0]))[0], p)


def test_adam_zero_gradient():
    cfg = OptimizerConfig("adam", weight_decay=0.0)
    p = np.array([0.3, -0.7, 2.0])
    new, st = step(cfg, init_state(cfg, 3), p, np.zeros(3))
    np.testing.assert_array_equal(new, p)
    assert st.step == 1


def test_adam_matches_reference(rng):
    cfg = OptimizerConfig("adam", learning_rate=3e-3, weight_decay=1e-2)
    p0 = rng.normal(size=6)
    grads = rng.normal(size=(25, 6))
    p, st = p0, init_state(cfg, 6)
    for g in grads:
        p, st = step(cfg, st, p, g)
    ref = _adam_reference(p0, grads, 3e-3, 0.9, 0.999, 1e-8, 1e-2, 25)
    np.testing.assert_allclose(p, ref, rtol=1e-12, atol=1e-15)
    # first step moves each coordinate by about lr against the gradient sign
    first, _ = step(cfg, init_state(cfg, 6), p0, grads[0])
    ref1 = _adam_reference(p0, grads[:1], 3e-3, 0.9, 0.999, 1e-8, 1e-2, 1)
    np.testing.assert_allclose(first, ref1, rtol=1e-12, atol=1e-15)


def test_adam_gradient_scale_invariance(rng):
    cfg = OptimizerConfig("adam", learning_rate=1e-3, weight_decay=0.0)
    n = 8
    p, st = rng.normal(size=n), init_state(cfg, n)
    for _ in range(150):
        p, st = step(cfg, st, p, rng.normal(size=n))
    scaled = OptimizerState(st.step, st.m * 1e3, st.v * 1e6)
    g = rng.normal(size=n)
    a, _ = step(cfg, st, p, g)
    b, _ = step(cfg, scaled, p, g * 1e3)
    da, db = a - p, b - p
    assert np.max(np.abs(da - db) / np.abs(da)) < 1e-6


def test_determinism_and_purity(rng):
    cfg = OptimizerConfig()
    p, g = rng.normal(size=4), rng.normal(size=4)
    st = init_state(cfg, 4)
    p_copy = p.copy()
    a = step(cfg, st, p, g)
    b = step(cfg, st, p, g)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(p, p_copy)
    assert st.step == 0 and not st.m.any()


def test_errors():
    cfg = OptimizerConfig()
    with pytest.raises(InvalidInputError):
        step(cfg, init_state(cfg, 2), np.zeros(2), np.array([np.nan, 0.0]))
    with pytest.raises(InvalidInputError):
        step(cfg, init_state(cfg, 3), np.zeros(2), np.zeros(2))
    for bad in (dict(learning_rate=-1.0), dict(weight_decay=-1.0), dict(beta1=1.0), dict(epsilon_hat=0.0),
                dict(kind="rmsprop")):
        with pytest.raises(InvalidInputError):
            OptimizerConfig(**bad)
