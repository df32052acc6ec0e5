import numpy as np
import pytest

from confdiff.errors import InvalidInputError, InvalidStateError
from confdiff.models import (
    ModelParams,
    ModelSpec,
    backward,
    forward,
    init_model,
    load_params,
    predict,
    save_params,
)

from conftest import gradient_check_draws, relative_error, stacked_scores


class TestInit:
    def test_linear_shape(self):
        p = init_model(ModelSpec("linear", 3))
        assert len(p) == 4
        assert p.layers()[0][1][0] == 0.0

    def test_default_mlp_count(self):
        # (2*64 + 64) + (64*64 + 64) + (64*64 + 64) + (64*1 + 1)
        expected = 192 + 4160 + 4160 + 65
        assert expected == 8577
        assert len(init_model(ModelSpec("mlp", 2, (64, 64, 64)))) == expected

    def test_determinism(self):
        a = init_model(ModelSpec("mlp", 2, (8, 8), init_seed=11))
        b = init_model(ModelSpec("mlp", 2, (8, 8), init_seed=11))
        np.testing.assert_array_equal(a.flat, b.flat)

    def test_uniform_limits_and_zero_biases(self):
        p = init_model(ModelSpec("mlp", 5, (30, 7)))
        for w, b in p.layers():
            lim = np.sqrt(6.0 / sum(w.shape))
            assert np.all(np.abs(w) <= lim)
            assert np.abs(w).max() > 0.8 * lim
            assert np.all(b == 0.0)

    def test_spec_validation(self):
        with pytest.raises(InvalidInputError):
            ModelSpec("mlp", 2, ())
        with pytest.raises(InvalidInputError):
            ModelSpec("cnn", 2)


class TestForward:
    def test_zero_linear(self, rng):
        p = ModelParams(ModelSpec("linear", 4).layer_shapes())
        np.testing.assert_array_equal(forward(p, rng.normal(size=(6, 4)))[0], 0.0)

    def test_zero_weights_give_final_bias(self, rng):
        p = ModelParams(ModelSpec("mlp", 2, (5, 5)).layer_shapes())
        p.flat[-1] = 0.375
        assert forward(p, rng.normal(size=2))[0] == 0.375

    def test_matches_independent_evaluation(self, rng):
        p = init_model(ModelSpec("mlp", 3, (16, 9, 4), 2))
        p.flat[:] += rng.normal(scale=0.1, size=len(p))
        x = rng.normal(size=(20, 3))
        s, _ = forward(p, x)
        ref = [stacked_scores(p.shapes, p.flat, xi)[0] for xi in x]
        np.testing.assert_allclose(s, ref, rtol=1e-13, atol=1e-15)
        # BLAS blocking depends on the row count, so chunks agree to rounding only
        np.testing.assert_allclose(predict(p, x, chunk=7), s, rtol=1e-14, atol=1e-15)

    def test_single_point_returns_float(self):
        p = init_model(ModelSpec("linear", 2))
        assert isinstance(forward(p, [1.0, 2.0])[0], float)

    def test_dimension_mismatch(self):
        p = init_model(ModelSpec("linear", 2))
        with pytest.raises(InvalidInputError):
            forward(p, [1.0, 2.0, 3.0])

    def test_output_layer_scaling(self, rng):
        p = init_model(ModelSpec("mlp", 2, (12, 12), 4))
        x = rng.normal(size=(30, 2))
        base = predict(p, x)
        for lam in (0.5, 4.0, 3.7):
            q = p.copy()
            w, b = q.layers()[-1]
            w *= lam
            b += 0.0
            b *= lam
            scaled = predict(q, x)
            if lam in (0.5, 4.0):
                # powers of two scale every rounding step exactly
                np.testing.assert_array_equal(scaled, lam * base)
            else:
                np.testing.assert_allclose(scaled, lam * base, rtol=1e-14)

    def test_no_side_effects(self, rng):
        p = init_model(ModelSpec("mlp", 2, (6,), 1))
        before = p.flat.copy()
        forward(p, rng.normal(size=(4, 2)))
        np.testing.assert_array_equal(p.flat, before)


class TestBackward:
    def test_linear_closed_form(self):
        p = init_model(ModelSpec("linear", 3))
        x = np.array([0.5, -2.0, 1.5])
        _, cache = forward(p, x)
        np.testing.assert_array_equal(backward(p, cache, [2.0]), [1.0, -4.0, 3.0, 2.0])

    def test_zero_upstream(self, rng):
        p = init_model(ModelSpec("mlp", 2, (8, 8)))
        _, cache = forward(p, rng.normal(size=(3, 2)))
        np.testing.assert_array_equal(backward(p, cache, np.zeros(3)), 0.0)

    def test_batch_is_sum_of_points(self, rng):
        p = init_model(ModelSpec("mlp", 2, (8, 8), 3))
        x = rng.normal(size=(5, 2))
        up = rng.normal(size=5)
        _, cache = forward(p, x)
        total = sum(backward(p, forward(p, x[i])[1], [up[i]]) for i in range(5))
        np.testing.assert_allclose(backward(p, cache, up), total, rtol=1e-12, atol=1e-15)

    @pytest.mark.parametrize("kind", ["linear", "mlp"])
    def test_finite_differences(self, kind):
        worst = 0.0
        for _, _, got, layered, flat, coords in gradient_check_draws(kind, 50, seed=17):
            worst = max(worst, relative_error(got, layered), relative_error(got[coords], flat))
        assert worst < 1e-5

    def test_stale_cache(self, rng):
        p = init_model(ModelSpec("mlp", 2, (8, 8)))
        q = init_model(ModelSpec("mlp", 2, (8, 4)))
        _, cache = forward(q, rng.normal(size=2))
        with pytest.raises(InvalidStateError):
            backward(p, cache, [1.0])
        _, cache = forward(p, rng.normal(size=(3, 2)))
        with pytest.raises(InvalidStateError):
            backward(p, cache, [1.0])


def test_checkpoint_round_trip(tmp_path, rng):
    p = init_model(ModelSpec("mlp", 3, (7, 5), 9))
    p.flat[:] += rng.normal(size=len(p))
    path = tmp_path / "m.bin"
    save_params(path, p)
    q = load_params(path)
    assert q.shapes == p.shapes
    np.testing.assert_array_equal(q.flat, p.flat)
    raw = path.read_bytes()
    assert raw[:4] == b"CDMP" and len(raw) == 4 + 8 + 8 * 3 + 8 * len(p)
    (tmp_path / "bad.bin").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(InvalidInputError):
        load_params(tmp_path / "bad.bin")
