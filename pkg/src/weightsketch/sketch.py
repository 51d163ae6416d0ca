"""Constant-memory Gaussian sketch of a weight trajectory.

A `WelfordAccumulator` folds each optimizer iterate into running
per-coordinate mean/M2 arrays (single pass, no sample storage); finalizing
yields the diagonal `GaussianPosterior` whose moments match the trajectory,
with the Bessel-corrected /(count-1) variance.
"""

from dataclasses import dataclass

import numpy as np

from .nn import NetworkShape


@dataclass
class GaussianPosterior:
    """Independent per-coordinate normal: mean vector and variance vector."""

    mu: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.sigma2 = np.asarray(self.sigma2, dtype=np.float64)
        if self.mu.shape != self.sigma2.shape or self.mu.ndim != 1:
            raise ValueError("mu and sigma2 must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(self.mu)) and np.all(np.isfinite(self.sigma2))):
            raise ValueError("posterior moments must be finite")
        if np.any(self.sigma2 < 0):
            raise ValueError("sigma2 must be non-negative")

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """One draw w = mu + sigma * z, z ~ N(0, I)."""
        return self.mu + np.sqrt(self.sigma2) * rng.standard_normal(self.dim)


class WelfordAccumulator:
    """Streaming mean/variance over equal-length vectors.

    State is exactly two arrays plus a counter regardless of how many
    samples are pushed; the update form avoids the catastrophic
    cancellation of the naive sum-of-squares estimator.
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.count = 0
        self.mean = np.zeros(dim, dtype=np.float64)
        self.m2 = np.zeros(dim, dtype=np.float64)

    def push(self, sample: np.ndarray) -> None:
        sample = np.asarray(sample, dtype=np.float64)
        if sample.shape != self.mean.shape:
            raise ValueError(
                f"sample length {sample.shape} does not match accumulator {self.mean.shape}"
            )
        if not np.all(np.isfinite(sample)):
            raise ValueError("sample contains non-finite values")
        self.count += 1
        delta = sample - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (sample - self.mean)

    def finalize(self) -> GaussianPosterior:
        """Moments of everything pushed so far; needs at least two samples."""
        if self.count < 2:
            raise ValueError(f"need at least 2 samples to estimate a variance, have {self.count}")
        return GaussianPosterior(mu=self.mean.copy(), sigma2=self.m2 / (self.count - 1))


def save_posterior(path, posterior: GaussianPosterior, shape: NetworkShape) -> None:
    """Snapshot mu/sigma2 plus network shape; float64 round-trips exactly."""
    if posterior.dim != shape.param_count:
        raise ValueError("posterior length does not match the network shape")
    np.savez(
        path,
        mu=posterior.mu,
        sigma2=posterior.sigma2,
        input_dim=np.int64(shape.input_dim),
        hidden_dims=np.asarray(shape.hidden_dims, dtype=np.int64),
        output_dim=np.int64(shape.output_dim),
    )


def load_posterior(path) -> tuple[GaussianPosterior, NetworkShape]:
    with np.load(path) as data:
        shape = NetworkShape(
            input_dim=int(data["input_dim"]),
            hidden_dims=tuple(int(d) for d in data["hidden_dims"]),
            output_dim=int(data["output_dim"]),
        )
        posterior = GaussianPosterior(mu=data["mu"], sigma2=data["sigma2"])
    if posterior.dim != shape.param_count:
        raise ValueError("corrupt snapshot: moment arrays do not match the stored shape")
    return posterior, shape
