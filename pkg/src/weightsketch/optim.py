"""Parameter-update rules: SGD, annealed Langevin SGD, Adam, noisy Adam.

All rules ascend the log posterior (they *add* the gradient), so a single
gradient convention serves every trainer. Noise-injecting steps take a
numpy Generator; anything with a `standard_normal(size)` method works,
which keeps the deterministic limits directly testable.
"""

from dataclasses import dataclass, replace

import numpy as np


def _check_grad(grad: np.ndarray) -> np.ndarray:
    grad = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        raise ValueError("gradient contains non-finite values; update refused")
    return grad


@dataclass
class SgldSchedule:
    """Polynomially annealed step sizes a*(b+t)^(-decay).

    decay in (0.5, 1] makes the rates square-summable but not summable,
    the classic validity condition for Langevin-style samplers.
    """

    base_rate: float = 0.005
    offset: float = 1.0
    decay: float = 0.55
    t: int = 0

    def __post_init__(self):
        if self.base_rate < 0:
            raise ValueError("base_rate must be >= 0")
        if self.offset <= 0:
            raise ValueError("offset must be positive")
        if not 0.5 < self.decay <= 1.0:
            raise ValueError(f"decay must lie in (0.5, 1], got {self.decay}")

    def rate(self) -> float:
        """Step size at the current counter."""
        return self.base_rate * (self.offset + self.t) ** (-self.decay)

    def next_rate(self) -> float:
        """Step size at the current counter; advances the counter by one."""
        eps = self.rate()
        self.t += 1
        return eps


def sgd_step(params: np.ndarray, grad: np.ndarray, rate: float) -> np.ndarray:
    """Plain ascent step w + rate*grad."""
    grad = _check_grad(grad)
    return params + rate * grad


def sgld_step(
    params: np.ndarray,
    grad: np.ndarray,
    schedule: SgldSchedule,
    rng: np.random.Generator,
) -> np.ndarray:
    """Langevin update w + (eps/2)*grad + N(0, eps), advancing the schedule.

    The injected noise variance equals the step size eps (not eps^2),
    matching the Langevin discretization; `grad` must be the rescaled
    log-posterior gradient for the iterates to sample the posterior.
    """
    grad = _check_grad(grad)
    eps = schedule.next_rate()
    noise = np.sqrt(eps) * rng.standard_normal(params.shape)
    return params + 0.5 * eps * grad + noise


@dataclass
class AdamState:
    """Adam moment estimates plus the latest per-parameter step scale."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    alpha: np.ndarray | None = None  # adaptive rate from the latest step

    @classmethod
    def init(cls, n_params: int, lr: float = 0.005, beta1: float = 0.9,
             beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(m=np.zeros(n_params), v=np.zeros(n_params), t=0,
                   lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(
    params: np.ndarray, grad: np.ndarray, state: AdamState
) -> tuple[np.ndarray, AdamState]:
    """Bias-corrected Adam ascent step.

    The update is alpha * m with the per-parameter adaptive rate
    alpha = lr * sqrt(1-beta2^t) / (1-beta1^t) / (sqrt(v) + eps);
    alpha is kept on the returned state so noise can be scaled by it.
    """
    grad = _check_grad(grad)
    if state.m.shape != params.shape or state.v.shape != params.shape:
        raise ValueError("optimizer state arrays must match the parameter shape")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    alpha = (
        state.lr
        * np.sqrt(1.0 - state.beta2**t)
        / (1.0 - state.beta1**t)
        / (np.sqrt(v) + state.eps)
    )
    new_state = replace(state, m=m, v=v, t=t, alpha=alpha)
    return params + alpha * m, new_state


def noisy_adam_step(
    params: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    rng: np.random.Generator,
) -> tuple[np.ndarray, AdamState]:
    """Adam step plus Gaussian noise with per-coordinate std alpha."""
    new_params, new_state = adam_step(params, grad, state)
    noise = new_state.alpha * rng.standard_normal(params.shape)
    return new_params + noise, new_state
