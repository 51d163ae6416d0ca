import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weightsketch.nn import (
    Batch,
    NetworkShape,
    dropout_masks,
    forward,
    init_params,
    log_posterior_grad,
    log_posterior_value,
    split_params,
)


class TestNetworkShape:
    def test_default_parameter_count_matches_layout(self):
        # 784*200+200 + 200*200+200 + 200*200+200 + 200*10+10
        assert NetworkShape().param_count == 239_410

    def test_rejects_empty_hidden(self):
        with pytest.raises(ValueError):
            NetworkShape(hidden_dims=())

    @pytest.mark.parametrize("bad", [0, -3])
    def test_rejects_nonpositive_dims(self, bad):
        with pytest.raises(ValueError):
            NetworkShape(input_dim=bad)
        with pytest.raises(ValueError):
            NetworkShape(hidden_dims=(bad,))

    def test_two_hidden_layer_variant_expressible(self):
        shape = NetworkShape(hidden_dims=(200, 200))
        assert shape.param_count == 784 * 200 + 200 + 200 * 200 + 200 + 200 * 10 + 10

    def test_split_params_returns_views(self, tiny_shape):
        params = np.zeros(tiny_shape.param_count)
        w0, b0 = split_params(tiny_shape, params)[0]
        w0[0, 0] = 5.0
        b0[-1] = -2.0
        assert params[0] == 5.0
        assert params.sum() == 3.0

    def test_split_params_length_mismatch(self, tiny_shape):
        with pytest.raises(ValueError):
            split_params(tiny_shape, np.zeros(tiny_shape.param_count + 1))


class TestInitParams:
    def test_same_seed_identical(self, tiny_shape):
        a = init_params(tiny_shape, seed=3)
        b = init_params(tiny_shape, seed=3)
        np.testing.assert_array_equal(a, b)

    def test_different_seeds_differ(self, tiny_shape):
        assert np.any(init_params(tiny_shape, 0) != init_params(tiny_shape, 1))

    def test_biases_zero_and_weights_bounded(self, tiny_shape):
        params = init_params(tiny_shape, 9)
        for w, b in split_params(tiny_shape, params):
            assert np.all(b == 0.0)
            bound = math.sqrt(6.0 / sum(w.shape))
            assert np.all(np.abs(w) <= bound)
            assert np.any(w != 0.0)


class TestForward:
    def test_zero_params_give_uniform_rows(self):
        shape = NetworkShape(input_dim=5, hidden_dims=(4,), output_dim=10)
        probs = forward(shape, np.zeros(shape.param_count), np.random.default_rng(0).random((6, 5)))
        np.testing.assert_allclose(probs, 0.1, atol=1e-15)

    def test_hand_evaluated_single_hidden_unit(self):
        # x=(0.6,0.2), W1=(1,-2), b1=0.5, W2=(2,-1), b2=(0.1,-0.3)
        shape = NetworkShape(input_dim=2, hidden_dims=(1,), output_dim=2)
        params = np.array([1.0, -2.0, 0.5, 2.0, -1.0, 0.1, -0.3])
        probs = forward(shape, params, np.array([[0.6, 0.2]]))
        z = 0.6 * 1.0 + 0.2 * -2.0 + 0.5
        a = max(z, 0.0)
        logits = (a * 2.0 + 0.1, a * -1.0 - 0.3)
        denom = math.exp(logits[0]) + math.exp(logits[1])
        expected = [math.exp(logits[0]) / denom, math.exp(logits[1]) / denom]
        np.testing.assert_allclose(probs[0], expected, rtol=1e-12)

    def test_duplicated_rows_identical_outputs(self, tiny_shape):
        rng = np.random.default_rng(5)
        params = rng.normal(size=tiny_shape.param_count)
        x = rng.random((1, 4))
        probs = forward(tiny_shape, params, np.repeat(x, 4, axis=0))
        np.testing.assert_array_equal(probs, np.repeat(probs[:1], 4, axis=0))

    def test_is_pure(self, tiny_shape):
        rng = np.random.default_rng(6)
        params = rng.normal(size=tiny_shape.param_count)
        x = rng.random((3, 4))
        np.testing.assert_array_equal(forward(tiny_shape, params, x),
                                      forward(tiny_shape, params, x))

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), scale=st.floats(0.1, 50.0))
    def test_rows_sum_to_one(self, seed, scale):
        shape = NetworkShape(input_dim=3, hidden_dims=(4,), output_dim=5)
        rng = np.random.default_rng(seed)
        params = rng.normal(0.0, scale, shape.param_count)
        probs = forward(shape, params, rng.random((8, 3)))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(probs >= 0.0)

    def test_dimension_mismatch_raises(self, tiny_shape):
        params = np.zeros(tiny_shape.param_count)
        with pytest.raises(ValueError):
            forward(tiny_shape, params, np.zeros((2, 7)))

    def test_nonfinite_input_raises(self, tiny_shape):
        params = np.zeros(tiny_shape.param_count)
        with pytest.raises(ValueError):
            forward(tiny_shape, params, np.full((1, 4), np.nan))


class TestLogPosteriorGrad:
    def test_saturated_batch_leaves_prior_only(self):
        # big weights saturate the 2-way softmax so the likelihood term is
        # exactly zero in float64 and the gradient is -w alone
        shape = NetworkShape(input_dim=1, hidden_dims=(1,), output_dim=2)
        params = np.array([50.0, 0.0, 50.0, -50.0, 0.0, 0.0])
        batch = Batch(inputs=np.array([[1.0]]), labels=np.array([0]))
        out = log_posterior_grad(shape, params, batch, total_train_size=1, prior_precision=1.0)
        np.testing.assert_array_equal(out.grad, -params)
        assert out.accuracy == 1.0

    def test_matches_central_finite_differences(self, tiny_shape, tiny_batch):
        rng = np.random.default_rng(12)
        params = rng.normal(0.0, 0.5, tiny_shape.param_count)
        analytic = log_posterior_grad(tiny_shape, params, tiny_batch,
                                      total_train_size=50, prior_precision=2.0).grad
        h = 1e-5
        numeric = np.zeros_like(params)
        for i in range(params.size):
            up, down = params.copy(), params.copy()
            up[i] += h
            down[i] -= h
            numeric[i] = (
                log_posterior_value(tiny_shape, up, tiny_batch, 50, 2.0)
                - log_posterior_value(tiny_shape, down, tiny_batch, 50, 2.0)
            ) / (2 * h)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-4)
        assert np.max(np.abs(analytic - numeric) / denom) < 1e-5

    def test_minibatch_rescaling_is_linear_in_total_size(self, tiny_shape, tiny_batch):
        rng = np.random.default_rng(13)
        params = rng.normal(0.0, 0.3, tiny_shape.param_count)
        lam = 1.5
        g1 = log_posterior_grad(tiny_shape, params, tiny_batch, 5, lam).grad
        g2 = log_posterior_grad(tiny_shape, params, tiny_batch, 10, lam).grad
        likelihood = g1 + lam * params
        np.testing.assert_allclose(g2 + lam * params, 2.0 * likelihood, rtol=1e-12)

    def test_label_out_of_range_raises(self, tiny_shape):
        batch = Batch(inputs=np.random.default_rng(1).random((2, 4)),
                      labels=np.array([0, 5]))
        with pytest.raises(ValueError):
            log_posterior_grad(tiny_shape, np.zeros(tiny_shape.param_count), batch, 2)

    def test_total_train_size_below_batch_raises(self, tiny_shape, tiny_batch):
        with pytest.raises(ValueError):
            log_posterior_grad(tiny_shape, np.zeros(tiny_shape.param_count), tiny_batch, 2)

    def test_nonpositive_prior_precision_raises(self, tiny_shape, tiny_batch):
        with pytest.raises(ValueError):
            log_posterior_grad(tiny_shape, np.zeros(tiny_shape.param_count),
                               tiny_batch, 5, prior_precision=0.0)

    def test_mean_nll_and_accuracy_ranges(self, tiny_shape, tiny_batch):
        out = log_posterior_grad(tiny_shape, np.zeros(tiny_shape.param_count), tiny_batch, 5)
        assert out.mean_nll == pytest.approx(math.log(2.0))
        assert 0.0 <= out.accuracy <= 1.0


class TestDropoutMasks:
    def test_rate_zero_all_ones(self, tiny_shape):
        masks = dropout_masks(tiny_shape, 0.0, np.random.default_rng(0))
        for m in masks:
            np.testing.assert_array_equal(m, 1.0)

    def test_zeroed_fraction_near_rate(self):
        shape = NetworkShape(input_dim=2, hidden_dims=(50,), output_dim=2)
        rng = np.random.default_rng(3)
        zeroed = np.mean([
            np.mean(dropout_masks(shape, 0.5, rng)[0] == 0.0) for _ in range(10_000)
        ])
        assert abs(zeroed - 0.5) < 0.02 * 0.5

    def test_survivors_scaled(self, tiny_shape):
        masks = dropout_masks(tiny_shape, 0.25, np.random.default_rng(4))
        survivors = masks[0][masks[0] != 0.0]
        np.testing.assert_allclose(survivors, 1.0 / 0.75)

    def test_invalid_rate_rejected(self, tiny_shape):
        with pytest.raises(ValueError):
            dropout_masks(tiny_shape, 1.0, np.random.default_rng(0))

    def test_masked_gradient_matches_finite_differences(self, tiny_shape, tiny_batch):
        # dropout must be differentiated through, not just applied forward
        rng = np.random.default_rng(14)
        params = rng.normal(0.0, 0.4, tiny_shape.param_count)
        masks = dropout_masks(tiny_shape, 0.5, rng, n=tiny_batch.size)
        analytic = log_posterior_grad(tiny_shape, params, tiny_batch, 5,
                                      hidden_masks=masks).grad
        h = 1e-5
        numeric = np.zeros_like(params)
        for i in range(params.size):
            up, down = params.copy(), params.copy()
            up[i] += h
            down[i] -= h
            numeric[i] = (
                log_posterior_value(tiny_shape, up, tiny_batch, 5, hidden_masks=masks)
                - log_posterior_value(tiny_shape, down, tiny_batch, 5, hidden_masks=masks)
            ) / (2 * h)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-4)
        assert np.max(np.abs(analytic - numeric) / denom) < 1e-5
