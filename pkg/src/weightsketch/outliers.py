"""Disagreement thresholding and detection scoring.

Calibration measures the disagreement distribution on a batch of training
data; a sample is flagged as an outlier when its disagreement reaches the
mean plus three standard deviations of that calibration batch (the wide
margin keeps the false-positive rate down).
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DisagreementStats:
    """Mean/std of calibration-batch disagreements."""

    mean: float
    std: float
    batch_size: int

    @property
    def threshold(self) -> float:
        return self.mean + 3.0 * self.std


@dataclass
class OutlierReport:
    """Per-sample flags and the confusion counts against ground truth."""

    flags: np.ndarray
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float | None  # None when no positives were predicted
    recall: float | None  # None when no true outliers are present


def calibrate(d_train: np.ndarray) -> DisagreementStats:
    """Sample mean and Bessel-corrected std of training disagreements."""
    d = np.asarray(d_train, dtype=np.float64)
    if d.ndim != 1 or d.shape[0] < 2:
        raise ValueError("calibration needs at least 2 disagreement values")
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise ValueError("disagreements must be finite and non-negative")
    return DisagreementStats(
        mean=float(d.mean()), std=float(d.std(ddof=1)), batch_size=d.shape[0]
    )


def is_outlier(d, stats: DisagreementStats):
    """True where d >= mean + 3*std (inclusive). Works on scalars or arrays."""
    d = np.asarray(d, dtype=np.float64)
    flags = d >= stats.threshold
    return bool(flags) if flags.ndim == 0 else flags


def score_detection(flags, truth) -> OutlierReport:
    """Confusion counts, precision and recall of flags against truth.

    Positive class = outlier. Precision/recall whose denominator is zero
    are reported as None rather than 0.
    """
    flags = np.asarray(flags, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if flags.shape != truth.shape or flags.ndim != 1:
        raise ValueError("flags and truth must be 1-D and the same length")
    tp = int(np.sum(flags & truth))
    fp = int(np.sum(flags & ~truth))
    fn = int(np.sum(~flags & truth))
    tn = int(np.sum(~flags & ~truth))
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    return OutlierReport(flags=flags, tp=tp, fp=fp, tn=tn, fn=fn,
                         precision=precision, recall=recall)
