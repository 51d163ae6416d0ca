"""Built-in numerical self-checks, runnable from the command line.

These mirror the core correctness arguments: the analytic gradient against
central finite differences, the Langevin sampler against a closed-form
conjugate-Gaussian posterior, and the noisy-Adam noise scale against its
contract. Each returns a small result object with a `passed` flag.
"""

from dataclasses import dataclass

import numpy as np

from .nn import Batch, NetworkShape, log_posterior_grad, log_posterior_value
from .optim import AdamState, SgldSchedule, adam_step, noisy_adam_step, sgld_step
from .sketch import WelfordAccumulator


@dataclass
class GradCheckResult:
    max_rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def finite_diff_grad(shape: NetworkShape, params: np.ndarray, batch: Batch,
                     total_train_size: int, prior_precision: float,
                     h: float = 1e-5) -> np.ndarray:
    """Central finite differences of the scaled log posterior."""
    grad = np.zeros_like(params)
    for i in range(params.shape[0]):
        bumped = params.copy()
        bumped[i] = params[i] + h
        up = log_posterior_value(shape, bumped, batch, total_train_size, prior_precision)
        bumped[i] = params[i] - h
        down = log_posterior_value(shape, bumped, batch, total_train_size, prior_precision)
        grad[i] = (up - down) / (2.0 * h)
    return grad


def grad_check(seed: int = 0, tolerance: float = 1e-5, h: float = 1e-5) -> GradCheckResult:
    """Analytic vs finite-difference gradient on a small random network."""
    shape = NetworkShape(input_dim=4, hidden_dims=(3,), output_dim=2)
    rng = np.random.default_rng(seed)
    params = rng.normal(0.0, 0.5, shape.param_count)
    batch = Batch(inputs=rng.random((5, 4)), labels=rng.integers(0, 2, 5))
    analytic = log_posterior_grad(shape, params, batch, total_train_size=5,
                                  prior_precision=1.0).grad
    numeric = finite_diff_grad(shape, params, batch, 5, 1.0, h=h)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-4)
    rel = np.abs(analytic - numeric) / denom
    return GradCheckResult(max_rel_error=float(rel.max()), tolerance=tolerance)


@dataclass
class SamplerCheckResult:
    trajectory_mean: float
    trajectory_var: float
    posterior_mean: float
    posterior_var: float
    mean_se: float  # Monte-Carlo standard error of the trajectory mean

    @property
    def mean_error(self) -> float:
        return abs(self.trajectory_mean - self.posterior_mean)

    @property
    def var_rel_error(self) -> float:
        return abs(self.trajectory_var / self.posterior_var - 1.0)

    @property
    def passed(self) -> bool:
        return self.mean_error <= 3.0 * self.mean_se and self.var_rel_error <= 0.25


def sgld_conjugate_check(steps: int = 50_000, n_obs: int = 100,
                         seed: int = 20) -> SamplerCheckResult:
    """Sample a 1-D Gaussian-mean posterior with SGLD and compare moments.

    Unit-variance observations and a standard normal prior give the
    closed-form posterior N(sum(y)/(n+1), 1/(n+1)). Full-batch gradients
    (no minibatch rescaling) keep the target exact; the schedule is chosen
    nearly flat so the chain mixes over the whole run. The mean's standard
    error comes from block means, which absorbs autocorrelation.
    """
    rng = np.random.default_rng(seed)
    y = rng.normal(1.0, 1.0, size=n_obs)
    precision = n_obs + 1.0
    post_mean = y.sum() / precision
    post_var = 1.0 / precision

    # eps stays within roughly [3.7e-4, 9.1e-4] over 50k steps
    schedule = SgldSchedule(base_rate=0.1, offset=10_000.0, decay=0.51)
    w = np.zeros(1)
    acc = WelfordAccumulator(1)
    noise_rng = np.random.default_rng(seed + 1)
    trace = np.empty(steps)
    for t in range(steps):
        grad = -w + (y.sum() - n_obs * w)
        w = sgld_step(w, grad, schedule, noise_rng)
        acc.push(w)
        trace[t] = w[0]

    moments = acc.finalize()
    n_blocks = 100
    blocks = trace[: steps - steps % n_blocks].reshape(n_blocks, -1).mean(axis=1)
    mean_se = float(blocks.std(ddof=1) / np.sqrt(n_blocks))
    return SamplerCheckResult(
        trajectory_mean=float(moments.mu[0]),
        trajectory_var=float(moments.sigma2[0]),
        posterior_mean=float(post_mean),
        posterior_var=float(post_var),
        mean_se=mean_se,
    )


@dataclass
class NoiseCheckResult:
    std_ratio: float  # sample std of injected noise / adaptive rate
    tolerance: float = 0.05

    @property
    def passed(self) -> bool:
        return abs(self.std_ratio - 1.0) <= self.tolerance


def noisy_adam_noise_check(n_params: int = 10_000, seed: int = 4) -> NoiseCheckResult:
    """Noisy Adam's injected noise must have std alpha per coordinate."""
    rng = np.random.default_rng(seed)
    params = np.zeros(n_params)
    grad = rng.normal(1.0, 0.3, n_params)
    # advance once so the frozen state carries a defined adaptive rate
    params, state = adam_step(params, grad, AdamState.init(n_params))
    plain, ref_state = adam_step(params, grad, state)
    noisy, _ = noisy_adam_step(params, grad, state, np.random.default_rng(seed + 1))
    injected = noisy - plain
    ratio = float((injected / ref_state.alpha).std(ddof=1))
    return NoiseCheckResult(std_ratio=ratio)
