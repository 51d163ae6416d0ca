"""Single training runs for every method/optimizer combination.

One engine drives all arms: plain SGD on the annealed schedule, Langevin
SGD, Adam, and noisy Adam, with optional per-step dropout and an optional
moment sketch of the iterates. The sketching runs store only the current
parameters plus the accumulator's two arrays, independent of step count.
"""

import time
from dataclasses import dataclass

import numpy as np

from .data import BatchPlan, Dataset, next_batch
from .nn import NetworkShape, dropout_masks, init_params, log_posterior_grad
from .optim import (
    AdamState,
    SgldSchedule,
    adam_step,
    noisy_adam_step,
    sgd_step,
    sgld_step,
)
from .sketch import GaussianPosterior, WelfordAccumulator

OPTIMIZERS = ("sgld", "sgd-schedule", "adam", "noisy-adam")


@dataclass
class TrainResult:
    """Final weights plus, for sketching runs, the trajectory moments."""

    params: np.ndarray
    accumulator: WelfordAccumulator | None = None
    posterior: GaussianPosterior | None = None
    final_mean_nll: float = float("nan")
    wall_clock: float = 0.0


def subseeds(seed: int, n: int) -> list[int]:
    """Derive n independent integer seeds from one experiment seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def train_model(
    shape: NetworkShape,
    train: Dataset,
    *,
    optimizer: str,
    steps: int = 1000,
    batch_size: int = 100,
    schedule: SgldSchedule | None = None,
    lr: float = 0.005,
    prior_precision: float = 1.0,
    dropout_rate: float = 0.0,
    sketch: bool = False,
    seed: int = 0,
) -> TrainResult:
    """Run one seeded training loop.

    `schedule` drives the "sgld" and "sgd-schedule" optimizers (a fresh
    default schedule is used when None); `lr` drives the Adam variants.
    With sketch=True every post-update iterate is pushed into a Welford
    accumulator (no burn-in, no thinning) and finalized into a posterior.
    """
    if optimizer not in OPTIMIZERS:
        raise ValueError(f"unknown optimizer {optimizer!r}, expected one of {OPTIMIZERS}")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    init_seed, batch_seed, noise_seed, dropout_seed = subseeds(seed, 4)

    t0 = time.perf_counter()
    params = init_params(shape, init_seed)
    plan = BatchPlan.new(train.size, batch_size, batch_seed)
    noise_rng = np.random.default_rng(noise_seed)
    dropout_rng = np.random.default_rng(dropout_seed)
    if schedule is None:
        schedule = SgldSchedule()
    # Adam moments only exist for the Adam variants: sketching SGLD runs
    # must hold exactly params + running mean + running M2.
    adam_state = (
        AdamState.init(shape.param_count, lr=lr)
        if optimizer in ("adam", "noisy-adam")
        else None
    )
    acc = WelfordAccumulator(shape.param_count) if sketch else None

    mean_nll = float("nan")
    for _ in range(steps):
        batch = next_batch(train, plan)
        masks = None
        if dropout_rate > 0.0:
            masks = dropout_masks(shape, dropout_rate, dropout_rng, n=batch.size)
        out = log_posterior_grad(
            shape, params, batch, train.size, prior_precision, hidden_masks=masks
        )
        mean_nll = out.mean_nll
        if optimizer == "sgld":
            params = sgld_step(params, out.grad, schedule, noise_rng)
        elif optimizer == "sgd-schedule":
            params = sgd_step(params, out.grad, schedule.next_rate())
        elif optimizer == "adam":
            params, adam_state = adam_step(params, out.grad, adam_state)
        else:
            params, adam_state = noisy_adam_step(params, out.grad, adam_state, noise_rng)
        if acc is not None:
            acc.push(params)

    posterior = acc.finalize() if acc is not None else None
    return TrainResult(
        params=params,
        accumulator=acc,
        posterior=posterior,
        final_mean_nll=mean_nll,
        wall_clock=time.perf_counter() - t0,
    )
