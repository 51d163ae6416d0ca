"""Benchmark harness: train each method, sweep ensemble sizes, score
accuracy and outlier detection, and emit machine-readable reports.

A run is reproducible byte-for-byte from (config, seeds): training,
ensemble construction, calibration batches and CSV formatting are all
deterministic functions of the configuration.
"""

import json
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .data import BatchPlan, DataBundle, load_bundle, next_batch
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
from .nn import NetworkShape
from .optim import SgldSchedule
from .outliers import calibrate, is_outlier, score_detection
from .sketch import GaussianPosterior
from .training import TrainResult, subseeds, train_model

METHODS = ("ours-sgld", "ours-noisy-adam", "dropout", "standard")
ARMS = ("sgld-schedule", "adam")


@dataclass(frozen=True)
class ExperimentConfig:
    method: str = "ours-sgld"
    optimizer: str = "sgld-schedule"  # which arm the baselines train under
    ensemble_sizes: tuple[int, ...] = (1, 5, 10)
    steps: int = 1000
    batch_size: int = 100
    base_rate: float = 0.005
    schedule_offset: float = 1.0
    schedule_decay: float = 0.55
    seeds: tuple[int, ...] = (0, 1, 2)
    dropout_rate: float = 0.5
    prior_precision: float = 1.0
    input_dim: int = 784
    hidden_dims: tuple[int, ...] = (200, 200, 200)
    output_dim: int = 10
    data_dir: str | None = None  # None -> synthetic fallback
    synth_train: int = 2000
    synth_test: int = 1000
    synth_outliers: int = 1000
    synth_seed: int = 7

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.optimizer not in ARMS:
            raise ValueError(f"optimizer must be one of {ARMS}, got {self.optimizer!r}")
        if self.method == "ours-sgld" and self.optimizer != "sgld-schedule":
            raise ValueError("ours-sgld belongs to the sgld-schedule arm")
        if self.method == "ours-noisy-adam" and self.optimizer != "adam":
            raise ValueError("ours-noisy-adam belongs to the adam arm")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not self.ensemble_sizes or any(s < 1 for s in self.ensemble_sizes):
            raise ValueError("ensemble sizes must be a non-empty list of counts >= 1")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        object.__setattr__(self, "ensemble_sizes", tuple(int(s) for s in self.ensemble_sizes))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))

    @property
    def shape(self) -> NetworkShape:
        return NetworkShape(self.input_dim, self.hidden_dims, self.output_dim)

    def schedule(self) -> SgldSchedule:
        return SgldSchedule(self.base_rate, self.schedule_offset, self.schedule_decay)


@dataclass
class RunRecord:
    """Scores for one (method, ensemble size, seed) cell."""

    method: str
    size: int
    seed: int
    accuracy: float
    mean_d_in: float
    median_d_in: float
    mean_d_out: float
    median_d_out: float
    precision: float | None
    recall: float | None
    wall_clock: float


@dataclass
class RunReport:
    config: dict
    records: list[RunRecord]


def train_for_method(config: ExperimentConfig, bundle: DataBundle, seed: int) -> list[TrainResult]:
    """All training runs one method needs for one experiment seed."""
    shape = config.shape
    common = dict(
        steps=config.steps,
        batch_size=config.batch_size,
        prior_precision=config.prior_precision,
        lr=config.base_rate,
    )
    if config.method == "ours-sgld":
        return [train_model(shape, bundle.train, optimizer="sgld",
                            schedule=config.schedule(), sketch=True, seed=seed, **common)]
    if config.method == "ours-noisy-adam":
        return [train_model(shape, bundle.train, optimizer="noisy-adam",
                            sketch=True, seed=seed, **common)]
    baseline_opt = "sgd-schedule" if config.optimizer == "sgld-schedule" else "adam"
    if config.method == "dropout":
        return [train_model(shape, bundle.train, optimizer=baseline_opt,
                            schedule=config.schedule(), dropout_rate=config.dropout_rate,
                            seed=seed, **common)]
    # standard: max(sizes) independent runs; smaller sizes reuse prefixes
    member_seeds = np.random.SeedSequence([seed, 0xE5]).generate_state(max(config.ensemble_sizes))
    return [
        train_model(shape, bundle.train, optimizer=baseline_opt,
                    schedule=config.schedule(), seed=int(s), **common)
        for s in member_seeds
    ]


def _build_full_ensemble(config: ExperimentConfig, results: list[TrainResult],
                         eval_seed: int) -> Ensemble:
    shape = config.shape
    s_max = max(config.ensemble_sizes)
    if config.method in ("ours-sgld", "ours-noisy-adam"):
        return build_variational_ensemble(shape, results[0].posterior, s_max, eval_seed)
    if config.method == "dropout":
        return build_dropout_ensemble(shape, results[0].params, s_max,
                                      config.dropout_rate, eval_seed)
    return build_standard_ensemble(shape, [r.params for r in results])


def run_experiment(config: ExperimentConfig, bundle: DataBundle | None = None) -> RunReport:
    """Train and evaluate one method across its seeds and ensemble sizes."""
    if bundle is None:
        bundle = load_bundle(
            config.data_dir,
            synth_train=config.synth_train,
            synth_test=config.synth_test,
            synth_outliers=config.synth_outliers,
            synth_seed=config.synth_seed,
        )
    records = []
    truth = np.concatenate([
        np.zeros(bundle.test_in.size, dtype=bool),
        np.ones(bundle.test_out.size, dtype=bool),
    ])
    for seed in config.seeds:
        t_train = time.perf_counter()
        results = train_for_method(config, bundle, seed)
        train_wall = time.perf_counter() - t_train

        calib_seed, eval_seed = subseeds(seed, 6)[4:6]
        calib_plan = BatchPlan.new(bundle.train.size, config.batch_size, calib_seed)
        calib_batch = next_batch(bundle.train, calib_plan)

        full = _build_full_ensemble(config, results, eval_seed)
        probs_calib = ensemble_predictions(full, calib_batch.inputs).member_probs
        probs_in = ensemble_predictions(full, bundle.test_in.images).member_probs
        probs_out = ensemble_predictions(full, bundle.test_out.images).member_probs

        for size in config.ensemble_sizes:
            t_eval = time.perf_counter()
            d_train = disagreement(PredictionSet.from_members(probs_calib[:size]))
            stats = calibrate(d_train)

            pred_in = PredictionSet.from_members(probs_in[:size])
            accuracy = float(
                (predictive_mean(pred_in).argmax(axis=1) == bundle.test_in.labels).mean()
            )
            d_in = disagreement(pred_in)
            d_out = disagreement(PredictionSet.from_members(probs_out[:size]))

            flags = is_outlier(np.concatenate([d_in, d_out]), stats)
            detection = score_detection(flags, truth)
            records.append(RunRecord(
                method=config.method,
                size=size,
                seed=seed,
                accuracy=accuracy,
                mean_d_in=float(d_in.mean()),
                median_d_in=float(np.median(d_in)),
                mean_d_out=float(d_out.mean()),
                median_d_out=float(np.median(d_out)),
                precision=detection.precision,
                recall=detection.recall,
                wall_clock=train_wall + (time.perf_counter() - t_eval),
            ))
    return RunReport(config=asdict(config), records=records)


def arm_methods(optimizer: str) -> tuple[str, ...]:
    """The three methods compared within one optimizer arm."""
    ours = "ours-sgld" if optimizer == "sgld-schedule" else "ours-noisy-adam"
    return (ours, "dropout", "standard")


def bench_arm(config: ExperimentConfig, bundle: DataBundle | None = None,
              methods: tuple[str, ...] | None = None) -> RunReport:
    """Run every method of the configured arm on shared data."""
    if bundle is None:
        bundle = load_bundle(
            config.data_dir,
            synth_train=config.synth_train,
            synth_test=config.synth_test,
            synth_outliers=config.synth_outliers,
            synth_seed=config.synth_seed,
        )
    if methods is None:
        methods = arm_methods(config.optimizer)
    records = []
    for method in methods:
        records.extend(run_experiment(replace(config, method=method), bundle).records)
    echo = asdict(config) | {"methods": list(methods)}
    return RunReport(config=echo, records=records)


def _fmt(x) -> str:
    if x is None:
        return "nan"
    return format(float(x), ".6g")


def _grouped(records: list[RunRecord]) -> list[tuple[str, int, list[RunRecord]]]:
    """(method, size) groups, methods in first-appearance order, sizes ascending."""
    method_order = list(dict.fromkeys(r.method for r in records))
    groups = []
    for method in method_order:
        sizes = sorted({r.size for r in records if r.method == method})
        for size in sizes:
            cell = [r for r in records if r.method == method and r.size == size]
            groups.append((method, size, cell))
    return groups


def _mean_or_none(values) -> float | None:
    defined = [v for v in values if v is not None]
    return float(np.mean(defined)) if defined else None


def emit_report(report: RunReport, out_dir) -> list[Path]:
    """Write accuracy.csv, outlier.csv, disagreement.csv and config.json.

    Aggregates across seeds: accuracy as mean +- sample std, precision and
    recall as the mean of defined values, disagreement as the mean of
    per-seed medians. Floats print with 6 significant digits.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups = _grouped(report.records)

    lines_acc = ["method,size,mean,std"]
    lines_out = ["method,size,precision,recall"]
    lines_dis = ["method,size,median_d_in,median_d_out"]
    for method, size, cell in groups:
        accs = np.array([r.accuracy for r in cell])
        std = accs.std(ddof=1) if accs.size > 1 else float("nan")
        lines_acc.append(f"{method},{size},{_fmt(accs.mean())},{_fmt(std)}")
        lines_out.append(
            f"{method},{size},{_fmt(_mean_or_none([r.precision for r in cell]))},"
            f"{_fmt(_mean_or_none([r.recall for r in cell]))}"
        )
        lines_dis.append(
            f"{method},{size},{_fmt(np.mean([r.median_d_in for r in cell]))},"
            f"{_fmt(np.mean([r.median_d_out for r in cell]))}"
        )

    paths = []
    for name, lines in (("accuracy.csv", lines_acc), ("outlier.csv", lines_out),
                        ("disagreement.csv", lines_dis)):
        path = out_dir / name
        path.write_text("\n".join(lines) + "\n")
        paths.append(path)
    config_path = out_dir / "config.json"
    config_path.write_text(json.dumps(report.config, indent=2, sort_keys=True) + "\n")
    paths.append(config_path)
    return paths


def save_model(path, shape: NetworkShape, *, posterior: GaussianPosterior | None = None,
               weights: list[np.ndarray] | None = None, dropout_rate: float = 0.0) -> None:
    """Persist a trained model: either posterior moments or weight vectors."""
    meta = dict(
        input_dim=np.int64(shape.input_dim),
        hidden_dims=np.asarray(shape.hidden_dims, dtype=np.int64),
        output_dim=np.int64(shape.output_dim),
        dropout_rate=np.float64(dropout_rate),
    )
    if (posterior is None) == (weights is None):
        raise ValueError("provide exactly one of posterior or weights")
    if posterior is not None:
        np.savez(path, kind="posterior", mu=posterior.mu, sigma2=posterior.sigma2, **meta)
    else:
        np.savez(path, kind="weights", weights=np.stack(weights), **meta)


@dataclass
class ModelArtifact:
    shape: NetworkShape
    kind: str  # "posterior" or "weights"
    dropout_rate: float
    posterior: GaussianPosterior | None = None
    weights: list[np.ndarray] | None = None

    def ensemble(self, size: int, seed: int) -> Ensemble:
        """Build a test-time ensemble of the requested size."""
        if self.kind == "posterior":
            return build_variational_ensemble(self.shape, self.posterior, size, seed)
        if self.dropout_rate > 0.0:
            return build_dropout_ensemble(self.shape, self.weights[0], size,
                                          self.dropout_rate, seed)
        if size > len(self.weights):
            raise ValueError(
                f"requested ensemble size {size} but only {len(self.weights)} "
                "trained members are stored"
            )
        return build_standard_ensemble(self.shape, self.weights[:size])


def load_model(path) -> ModelArtifact:
    with np.load(path) as data:
        shape = NetworkShape(
            input_dim=int(data["input_dim"]),
            hidden_dims=tuple(int(d) for d in data["hidden_dims"]),
            output_dim=int(data["output_dim"]),
        )
        kind = str(data["kind"])
        dropout_rate = float(data["dropout_rate"])
        if kind == "posterior":
            return ModelArtifact(shape, kind, dropout_rate,
                                 posterior=GaussianPosterior(data["mu"], data["sigma2"]))
        return ModelArtifact(shape, kind, dropout_rate,
                             weights=[w for w in data["weights"]])
