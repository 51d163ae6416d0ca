import numpy as np
import pytest

from conftest import ZeroNoise
from weightsketch.optim import (
    AdamState,
    SgldSchedule,
    adam_step,
    noisy_adam_step,
    sgd_step,
    sgld_step,
)


class TestSgldSchedule:
    def test_rates_strictly_decreasing(self):
        sched = SgldSchedule()
        rates = [sched.next_rate() for _ in range(200)]
        assert all(a > b for a, b in zip(rates, rates[1:]))
        assert rates[0] == pytest.approx(0.005)

    @pytest.mark.parametrize("decay", [0.5, 0.49, 1.01, 0.0])
    def test_decay_outside_valid_interval_rejected(self, decay):
        with pytest.raises(ValueError):
            SgldSchedule(decay=decay)

    def test_decay_bounds_inclusive_exclusive(self):
        SgldSchedule(decay=1.0)  # valid: sum eps diverges, sum eps^2 converges
        SgldSchedule(decay=0.51)

    def test_nonpositive_offset_rejected(self):
        with pytest.raises(ValueError):
            SgldSchedule(offset=0.0)

    def test_zero_base_rate_allowed_for_degenerate_runs(self):
        assert SgldSchedule(base_rate=0.0).rate() == 0.0


class TestSgldStep:
    def test_zero_base_rate_leaves_params_unchanged(self):
        params = np.array([1.0, -2.0, 3.0])
        sched = SgldSchedule(base_rate=0.0)
        out = sgld_step(params, np.ones(3), sched, np.random.default_rng(0))
        np.testing.assert_array_equal(out, params)
        assert sched.t == 1

    def test_zero_noise_equals_half_rate_sgd(self):
        rng = np.random.default_rng(1)
        params = rng.normal(size=8)
        grad = rng.normal(size=8)
        sched = SgldSchedule(base_rate=0.07, offset=2.0, decay=0.6)
        eps = sched.rate()
        stepped = sgld_step(params, grad, sched, ZeroNoise())
        np.testing.assert_array_equal(stepped, sgd_step(params, grad, eps / 2.0))

    def test_noise_variance_equals_rate(self):
        params = np.zeros(200_000)
        sched = SgldSchedule(base_rate=0.04, offset=1.0, decay=0.55)
        eps = sched.rate()
        out = sgld_step(params, np.zeros_like(params), sched, np.random.default_rng(2))
        assert out.std(ddof=1) == pytest.approx(np.sqrt(eps), rel=0.02)

    def test_nonfinite_grad_refused(self):
        with pytest.raises(ValueError):
            sgld_step(np.zeros(2), np.array([1.0, np.inf]), SgldSchedule(),
                      np.random.default_rng(0))

    def test_seeded_reproducibility(self):
        params = np.ones(5)
        grad = np.full(5, -0.5)
        a = sgld_step(params, grad, SgldSchedule(), np.random.default_rng(42))
        b = sgld_step(params, grad, SgldSchedule(), np.random.default_rng(42))
        np.testing.assert_array_equal(a, b)


class TestSgdStep:
    def test_zero_rate_unchanged(self):
        params = np.array([2.0, -1.0])
        np.testing.assert_array_equal(sgd_step(params, np.ones(2), 0.0), params)

    def test_grad_minus_w_rate_one_zeroes(self):
        params = np.array([2.0, -1.0, 0.5])
        np.testing.assert_array_equal(sgd_step(params, -params, 1.0), np.zeros(3))

    def test_two_steps_sum_with_fixed_grad(self):
        params = np.array([1.0, 1.0])
        grad = np.array([0.3, -0.2])
        twice = sgd_step(sgd_step(params, grad, 0.1), grad, 0.1)
        np.testing.assert_allclose(twice, sgd_step(params, grad, 0.2), rtol=1e-15)


class TestAdamStep:
    def test_first_step_magnitude_is_lr(self):
        params = np.zeros(4)
        grad = np.array([2.0, -3.0, 0.5, -0.1])
        state = AdamState.init(4, lr=0.005)
        new, state = adam_step(params, grad, state)
        np.testing.assert_allclose(new, 0.005 * np.sign(grad), rtol=1e-5)
        assert state.t == 1

    def test_zero_grad_zero_state_no_update(self):
        params = np.array([1.0, 2.0])
        new, _ = adam_step(params, np.zeros(2), AdamState.init(2))
        np.testing.assert_array_equal(new, params)

    def test_first_step_scale_invariance(self):
        params = np.zeros(3)
        grad = np.array([0.4, -1.2, 2.0])
        a, _ = adam_step(params, grad, AdamState.init(3, lr=0.01))
        b, _ = adam_step(params, 10.0 * grad, AdamState.init(3, lr=0.01))
        np.testing.assert_allclose(a, b, rtol=1e-5)

    def test_state_is_not_mutated(self):
        state = AdamState.init(2)
        adam_step(np.zeros(2), np.ones(2), state)
        assert state.t == 0
        np.testing.assert_array_equal(state.m, 0.0)

    def test_mismatched_state_rejected(self):
        with pytest.raises(ValueError):
            adam_step(np.zeros(3), np.zeros(3), AdamState.init(2))

    def test_alpha_recorded_positive(self):
        _, state = adam_step(np.zeros(3), np.ones(3), AdamState.init(3))
        assert state.alpha is not None
        assert np.all(state.alpha > 0.0)


class TestNoisyAdamStep:
    def test_zero_noise_equals_adam_exactly(self):
        rng = np.random.default_rng(3)
        params = rng.normal(size=6)
        grad = rng.normal(size=6)
        state = AdamState.init(6)
        plain, _ = adam_step(params, grad, state)
        noisy, _ = noisy_adam_step(params, grad, state, ZeroNoise())
        np.testing.assert_array_equal(noisy, plain)

    def test_fixed_seed_bitwise_reproducible(self):
        params = np.zeros(5)
        grad = np.ones(5)
        state = AdamState.init(5)
        trajectories = []
        for _ in range(2):
            p, s = params, state
            rng = np.random.default_rng(9)
            for _ in range(10):
                p, s = noisy_adam_step(p, grad, s, rng)
            trajectories.append(p)
        np.testing.assert_array_equal(trajectories[0], trajectories[1])

    def test_injected_noise_std_matches_adaptive_rate(self):
        n = 10_000
        rng = np.random.default_rng(7)
        params = np.zeros(n)
        grad = rng.normal(1.0, 0.2, n)
        params, state = adam_step(params, grad, AdamState.init(n))
        plain, ref = adam_step(params, grad, state)
        noisy, _ = noisy_adam_step(params, grad, state, np.random.default_rng(8))
        ratio = (noisy - plain) / ref.alpha
        assert abs(ratio.std(ddof=1) - 1.0) < 0.05
