"""Gaussian weight-posterior sketching from noisy SGD trajectories.

Train a softmax classifier with Langevin SGD (or noisy Adam), fold the
weight iterates into a constant-memory diagonal-Gaussian sketch, sample
ensembles from it, and flag out-of-distribution inputs by thresholding
the ensemble's KL disagreement.
"""

from .data import BatchPlan, DataBundle, Dataset, load_bundle, next_batch, read_idx, synth_dataset, write_idx
from .ensembles import (
    Ensemble,
    PredictionSet,
    build_dropout_ensemble,
    build_standard_ensemble,
    build_variational_ensemble,
    disagreement,
    ensemble_predictions,
    predictive_mean,
)
from .experiment import (
    ExperimentConfig,
    RunRecord,
    RunReport,
    bench_arm,
    emit_report,
    load_model,
    run_experiment,
    save_model,
)
from .nn import Batch, GradOutput, NetworkShape, forward, init_params, log_posterior_grad, log_posterior_value
from .optim import AdamState, SgldSchedule, adam_step, noisy_adam_step, sgd_step, sgld_step
from .outliers import DisagreementStats, OutlierReport, calibrate, is_outlier, score_detection
from .sketch import GaussianPosterior, WelfordAccumulator, load_posterior, save_posterior
from .training import TrainResult, train_model

__version__ = "0.1.0"
