"""Test-time ensembles and the KL-disagreement uncertainty score.

Three constructions: draws from a Gaussian weight posterior, dropout
configurations of a single network (one fixed thinned net per member),
and independently trained networks. All reduce to a `PredictionSet`
holding every member's class probabilities plus their mean, from which
the per-sample disagreement is computed.
"""

from dataclasses import dataclass

import numpy as np

from .nn import NetworkShape, dropout_masks, forward
from .sketch import GaussianPosterior

PROB_FLOOR = 1e-12  # clamp inside logs only; bounds each KL term


@dataclass
class Ensemble:
    """A set of prediction sources sharing one architecture.

    Plain weight ensembles leave `mask_seeds` unset. Dropout ensembles
    hold the same weight vector once per member plus a per-member mask
    seed: each member is a fixed thinned configuration of the network.
    """

    shape: NetworkShape
    members: list[np.ndarray]
    dropout_rate: float = 0.0
    mask_seeds: tuple[int, ...] | None = None

    def __post_init__(self):
        if len(self.members) < 1:
            raise ValueError("an ensemble needs at least one member")
        n_params = self.shape.param_count
        for w in self.members:
            if w.shape != (n_params,):
                raise ValueError("member parameter vector does not match the network shape")
        if self.mask_seeds is not None and len(self.mask_seeds) != len(self.members):
            raise ValueError("need one mask seed per member")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {self.dropout_rate}")

    @property
    def size(self) -> int:
        return len(self.members)

    def prefix(self, size: int) -> "Ensemble":
        """First `size` members; sub-ensembles share the seed-stream prefix."""
        if not 1 <= size <= self.size:
            raise ValueError(f"prefix size must be in [1, {self.size}], got {size}")
        seeds = self.mask_seeds[:size] if self.mask_seeds is not None else None
        return Ensemble(self.shape, self.members[:size], self.dropout_rate, seeds)


@dataclass
class PredictionSet:
    """Per-member probability tensor (S, n, classes) and its mean (n, classes)."""

    member_probs: np.ndarray
    mean: np.ndarray

    @classmethod
    def from_members(cls, member_probs: np.ndarray) -> "PredictionSet":
        member_probs = np.asarray(member_probs, dtype=np.float64)
        if member_probs.ndim != 3 or member_probs.shape[0] < 1:
            raise ValueError("member_probs must be a non-empty (S, n, classes) tensor")
        return cls(member_probs=member_probs, mean=member_probs.mean(axis=0))

    @property
    def size(self) -> int:
        return self.member_probs.shape[0]


def ensemble_predictions(ens: Ensemble, inputs: np.ndarray) -> PredictionSet:
    """Run every member on `inputs` and average, in member order."""
    probs = []
    for i, w in enumerate(ens.members):
        masks = None
        if ens.mask_seeds is not None:
            rng = np.random.default_rng(ens.mask_seeds[i])
            masks = dropout_masks(ens.shape, ens.dropout_rate, rng)
        probs.append(forward(ens.shape, w, inputs, hidden_masks=masks))
    return PredictionSet.from_members(np.stack(probs))


def predictive_mean(pred: PredictionSet) -> np.ndarray:
    """Monte-Carlo predictive distribution: the member average."""
    return pred.mean


def disagreement(pred: PredictionSet) -> np.ndarray:
    """Per-sample sum over members of KL(member || ensemble mean).

    Probabilities are clamped to PROB_FLOOR inside the logs, and each
    member's KL is floored at zero, so the score is always finite and
    non-negative.
    """
    log_mean = np.log(np.maximum(pred.mean, PROB_FLOOR))
    log_members = np.log(np.maximum(pred.member_probs, PROB_FLOOR))
    kl = (pred.member_probs * (log_members - log_mean)).sum(axis=2)
    return np.maximum(kl, 0.0).sum(axis=0)


def build_variational_ensemble(
    shape: NetworkShape, posterior: GaussianPosterior, size: int, seed: int
) -> Ensemble:
    """`size` independent posterior draws from one seeded stream."""
    if size < 1:
        raise ValueError("ensemble size must be >= 1")
    rng = np.random.default_rng(seed)
    return Ensemble(shape, [posterior.sample(rng) for _ in range(size)])


def build_dropout_ensemble(
    shape: NetworkShape, params: np.ndarray, size: int, rate: float, seed: int
) -> Ensemble:
    """`size` thinned configurations of one trained network."""
    if size < 1:
        raise ValueError("ensemble size must be >= 1")
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    rng = np.random.default_rng(seed)
    mask_seeds = tuple(int(s) for s in rng.integers(0, 2**63, size=size))
    return Ensemble(shape, [params] * size, dropout_rate=rate, mask_seeds=mask_seeds)


def build_standard_ensemble(shape: NetworkShape, members: list[np.ndarray]) -> Ensemble:
    """Wrap final weights of independently trained networks."""
    return Ensemble(shape, list(members))
