"""Command-line harness.

Subcommands: `train` one model, `detect` outliers with a saved model,
`bench` a full method comparison with CSV reports, plus the `gradcheck`
and `samplecheck` numerical self-checks. The data directory can also be
supplied via the WEIGHTSKETCH_DATA environment variable; without it the
synthetic fallback datasets are used.
"""

import json
from pathlib import Path

import click
import numpy as np

from .data import BatchPlan, load_bundle, next_batch
from .diagnostics import grad_check, noisy_adam_noise_check, sgld_conjugate_check
from .ensembles import disagreement, ensemble_predictions, predictive_mean
from .experiment import (
    ARMS,
    METHODS,
    ExperimentConfig,
    bench_arm,
    emit_report,
    load_model,
    save_model,
    train_for_method,
)
from .outliers import calibrate, is_outlier, score_detection
from .training import subseeds, train_model


def _int_list(_ctx, _param, value: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in value.split(","))
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}")


_CONFIG_OPTIONS = [
    click.option("--optimizer", type=click.Choice(ARMS), default="sgld-schedule",
                 show_default=True, help="Optimizer arm the comparison runs under."),
    click.option("--steps", type=int, default=1000, show_default=True),
    click.option("--batch-size", type=int, default=100, show_default=True),
    click.option("--base-rate", type=float, default=0.005, show_default=True),
    click.option("--schedule-offset", type=float, default=1.0, show_default=True),
    click.option("--schedule-decay", type=float, default=0.55, show_default=True),
    click.option("--dropout-rate", type=float, default=0.5, show_default=True),
    click.option("--prior-precision", type=float, default=1.0, show_default=True),
    click.option("--hidden-dims", callback=_int_list, default="200,200,200",
                 show_default=True, help="Comma-separated hidden layer widths."),
    click.option("--data-dir", type=click.Path(exists=True, file_okay=False),
                 envvar="WEIGHTSKETCH_DATA", default=None,
                 help="Directory with MNIST (and optionally notMNIST) IDX files."),
    click.option("--synth-train", type=int, default=2000, show_default=True),
    click.option("--synth-test", type=int, default=1000, show_default=True),
    click.option("--synth-outliers", type=int, default=1000, show_default=True),
    click.option("--synth-seed", type=int, default=7, show_default=True),
]


def config_options(command):
    for option in reversed(_CONFIG_OPTIONS):
        command = option(command)
    return command


def _build_config(method: str, seeds, sizes, **kw) -> ExperimentConfig:
    try:
        return ExperimentConfig(method=method, seeds=seeds, ensemble_sizes=sizes, **kw)
    except ValueError as exc:
        raise click.ClickException(str(exc))


@click.group()
def main():
    """Weight-trajectory Gaussian sketching, ensembles and outlier detection."""


@main.command()
@click.option("--method", type=click.Choice(METHODS), default="ours-sgld", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--members", type=int, default=10, show_default=True,
              help="Independent runs for the standard-ensemble method.")
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Output model file (.npz).")
@config_options
def train(method, seed, members, out, **kw):
    """Train one model and save its posterior or weights."""
    sizes = (members,) if method == "standard" else (1,)
    config = _build_config(method, (seed,), sizes, **kw)
    bundle = load_bundle(config.data_dir, synth_train=config.synth_train,
                         synth_test=config.synth_test,
                         synth_outliers=config.synth_outliers,
                         synth_seed=config.synth_seed)
    results = train_for_method(config, bundle, seed)
    if method in ("ours-sgld", "ours-noisy-adam"):
        save_model(out, config.shape, posterior=results[0].posterior)
    elif method == "dropout":
        save_model(out, config.shape, weights=[results[0].params],
                   dropout_rate=config.dropout_rate)
    else:
        save_model(out, config.shape, weights=[r.params for r in results])
    wall = sum(r.wall_clock for r in results)
    click.echo(f"trained {method} on {bundle.train.name} "
               f"({len(results)} run(s), {wall:.1f}s) -> {out}")


@main.command()
@click.option("--model", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--size", type=int, default=10, show_default=True, help="Ensemble size.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Optional JSON report path.")
@config_options
def detect(model, size, seed, out, **kw):
    """Flag outliers on the test sets using a saved model."""
    artifact = load_model(model)
    kw = kw | {"hidden_dims": artifact.shape.hidden_dims}
    config = _build_config("standard", (seed,), (size,),
                           input_dim=artifact.shape.input_dim,
                           output_dim=artifact.shape.output_dim, **kw)
    bundle = load_bundle(config.data_dir, synth_train=config.synth_train,
                         synth_test=config.synth_test,
                         synth_outliers=config.synth_outliers,
                         synth_seed=config.synth_seed)
    calib_seed, eval_seed = subseeds(seed, 6)[4:6]
    try:
        ens = artifact.ensemble(size, eval_seed)
    except ValueError as exc:
        raise click.ClickException(str(exc))

    calib = next_batch(bundle.train, BatchPlan.new(bundle.train.size, config.batch_size, calib_seed))
    stats = calibrate(disagreement(ensemble_predictions(ens, calib.inputs)))
    pred_in = ensemble_predictions(ens, bundle.test_in.images)
    d_in = disagreement(pred_in)
    d_out = disagreement(ensemble_predictions(ens, bundle.test_out.images))
    accuracy = float((predictive_mean(pred_in).argmax(axis=1) == bundle.test_in.labels).mean())

    flags = is_outlier(np.concatenate([d_in, d_out]), stats)
    truth = np.concatenate([np.zeros(d_in.size, dtype=bool), np.ones(d_out.size, dtype=bool)])
    detection = score_detection(flags, truth)

    payload = {
        "model": str(model),
        "ensemble_size": size,
        "accuracy_in_distribution": accuracy,
        "calibration": {"mean": stats.mean, "std": stats.std, "threshold": stats.threshold},
        "median_disagreement": {"in": float(np.median(d_in)), "out": float(np.median(d_out))},
        "counts": {"tp": detection.tp, "fp": detection.fp,
                   "tn": detection.tn, "fn": detection.fn},
        "precision": detection.precision,
        "recall": detection.recall,
        "flags": detection.flags.tolist(),
    }
    if out is not None:
        Path(out).write_text(json.dumps(payload, indent=2) + "\n")
    click.echo(f"accuracy={accuracy:.4f} precision="
               f"{'nan' if detection.precision is None else f'{detection.precision:.4f}'} "
               f"recall={'nan' if detection.recall is None else f'{detection.recall:.4f}'} "
               f"threshold={stats.threshold:.6g}")


@main.command()
@click.option("--methods", default=None,
              help="Comma-separated subset of methods (default: the whole arm).")
@click.option("--sizes", callback=_int_list, default="1,5,10", show_default=True)
@click.option("--seeds", callback=_int_list, default="0,1,2", show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@config_options
def bench(methods, sizes, seeds, out_dir, **kw):
    """Run the full method comparison and write CSV/JSON reports."""
    arm = kw["optimizer"]
    ours = "ours-sgld" if arm == "sgld-schedule" else "ours-noisy-adam"
    config = _build_config(ours, seeds, sizes, **kw)
    method_list = tuple(methods.split(",")) if methods else None
    if method_list is not None:
        unknown = set(method_list) - set(METHODS)
        if unknown:
            raise click.ClickException(f"unknown methods: {sorted(unknown)}")
    report = bench_arm(config, methods=method_list)
    paths = emit_report(report, out_dir)
    for record in report.records:
        click.echo(f"{record.method:>15} size={record.size:<3} seed={record.seed} "
                   f"acc={record.accuracy:.4f} "
                   f"median_d_in={record.median_d_in:.3g} "
                   f"median_d_out={record.median_d_out:.3g}")
    click.echo("wrote " + ", ".join(str(p) for p in paths))


@main.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--tolerance", type=float, default=1e-5, show_default=True)
def gradcheck(seed, tolerance):
    """Check analytic gradients against central finite differences."""
    result = grad_check(seed=seed, tolerance=tolerance)
    click.echo(f"max relative error {result.max_rel_error:.3g} "
               f"(tolerance {result.tolerance:g}): "
               f"{'PASS' if result.passed else 'FAIL'}")
    if not result.passed:
        raise SystemExit(1)


@main.command()
@click.option("--steps", type=int, default=50_000, show_default=True)
@click.option("--seed", type=int, default=20, show_default=True)
def samplecheck(steps, seed):
    """Check the Langevin sampler and the noisy-Adam noise contract."""
    sampler = sgld_conjugate_check(steps=steps, seed=seed)
    click.echo(
        f"sgld: trajectory mean {sampler.trajectory_mean:.5f} vs posterior "
        f"{sampler.posterior_mean:.5f} (|err| {sampler.mean_error:.2g}, "
        f"3*se {3 * sampler.mean_se:.2g}); variance {sampler.trajectory_var:.3g} vs "
        f"{sampler.posterior_var:.3g} (rel err {sampler.var_rel_error:.2%}): "
        f"{'PASS' if sampler.passed else 'FAIL'}"
    )
    noise = noisy_adam_noise_check(seed=seed)
    click.echo(f"noisy-adam: injected-noise std / adaptive rate = "
               f"{noise.std_ratio:.4f} (tolerance 5%): "
               f"{'PASS' if noise.passed else 'FAIL'}")
    if not (sampler.passed and noise.passed):
        raise SystemExit(1)


if __name__ == "__main__":
    main()
