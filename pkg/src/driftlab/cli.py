"""Command-line experiment runner.

Four subcommands, each writing CSV artifacts, rendered PNG figures and a
report.json into runs/<run_id>/:

    train      fit a network per a JSON config (run settings + distribution)
    sample     integrate the reverse sampler from a checkpoint or an exact drift
    eval       error curves and fits against the closed-form targets
    t1-sweep   final-time sweep of the exact-drift sampler on a point cloud

Distributions are named on the command line (five-point, four-point,
twenty-point, line, gaussian, smoothed, cloud) with --mu/--sigma/--csv where
the family needs parameters, or described inline in the train config file.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import figures
from .core import (
    ConfigError,
    DriftLabError,
    RunConfig,
    TargetKind,
    TrainingDiverged,
    build_exp_schedule,
)
from .distributions import (
    DataDistribution,
    IsotropicGaussian,
    LineGaussian,
    PointCloud,
    SmoothedCloud,
    dist_from_config,
    dist_to_config,
    five_point_cloud,
    four_point_cloud,
    load_pointcloud_csv,
    twenty_point_cloud,
)
from .diffusion import as_score, backward_sample, train
from .metrics import (
    ErrorCurve,
    absorption_frequencies,
    fit_lambda_constant,
    l2_error_over_p,
    lambda_true_estimate,
    pointwise_error,
    sample_moments,
    singularity_profile,
)
from .mlp import load_checkpoint, mlp_forward, save_checkpoint
from .oracles import analytic_score_fn, analytic_target_fn
from .report import (
    ExperimentReport,
    Timer,
    run_id,
    write_frequencies_csv,
    write_loss_csv,
    write_samples_csv,
)

_DIST_NAMES = ("five-point", "four-point", "twenty-point", "line", "gaussian",
               "smoothed", "cloud")


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}")


def _parse_floats(text: str) -> list:
    return [float(v) for v in text.split(",")]


def build_distribution(args) -> DataDistribution:
    """Distribution named by --dist/--oracle plus its parameter flags."""
    name = args.dist
    if name == "five-point":
        return five_point_cloud()
    if name == "four-point":
        return four_point_cloud()
    if name == "twenty-point":
        return twenty_point_cloud()
    if name == "line":
        return LineGaussian()
    if name == "gaussian":
        if args.mu is None or args.sigma is None:
            raise ConfigError("gaussian distribution needs --mu and --sigma")
        return IsotropicGaussian(_parse_vector(args.mu), args.sigma)
    if name == "smoothed":
        if args.sigma is None:
            raise ConfigError("smoothed distribution needs --sigma")
        base = (load_pointcloud_csv(args.csv, args.csv_weights) if args.csv
                else five_point_cloud())
        return SmoothedCloud(base, args.sigma)
    if name == "cloud":
        if not args.csv:
            raise ConfigError("cloud distribution needs --csv")
        return load_pointcloud_csv(args.csv, args.csv_weights)
    raise ConfigError(f"unknown distribution {name!r}")


def _dist_args(parser, flag="--dist"):
    parser.add_argument(flag, dest="dist", choices=_DIST_NAMES, help="target distribution")
    parser.add_argument("--mu", help="gaussian mean, comma separated")
    parser.add_argument("--sigma", type=float, help="gaussian/smoothing scale")
    parser.add_argument("--csv", help="point-cloud CSV (one point per row)")
    parser.add_argument("--csv-weights", action="store_true",
                        help="treat the last CSV column as weights")


def _schedule_args(parser):
    parser.add_argument("--t1", type=float, default=0.01, help="first grid time")
    parser.add_argument("--T", type=float, default=10.0, help="final grid time")
    parser.add_argument("--K", type=int, default=200, help="number of grid points")


def _make_run_dir(out: str, rid: str) -> Path:
    run_dir = Path(out) / rid
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def _drift_from_args(args, dist):
    """Score provider from --checkpoint, else the exact score for the dist."""
    if getattr(args, "checkpoint", None):
        model, meta = load_checkpoint(args.checkpoint)
        kind = TargetKind(meta.get("target_kind", "SCORE_S"))
        return as_score(kind, model), kind
    if dist is None:
        raise ConfigError("need --checkpoint or a distribution for an exact drift")
    return as_score(TargetKind.SCORE_S, analytic_score_fn(dist)), TargetKind.SCORE_S


# --- train -------------------------------------------------------------------

def cmd_train(args) -> int:
    cfg_path = Path(args.config)
    try:
        doc = json.loads(cfg_path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {cfg_path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{cfg_path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        )
    if not isinstance(doc, dict) or "run" not in doc or "distribution" not in doc:
        raise ConfigError(f"{cfg_path}: expected an object with 'run' and 'distribution'")
    config = RunConfig.from_dict(doc["run"])
    dist = dist_from_config(doc["distribution"])

    effective = {"command": "train", "run": config.to_dict(),
                 "distribution": dist_to_config(dist)}
    rid = run_id(effective)
    run_dir = _make_run_dir(args.out, rid)
    report = ExperimentReport("train", effective, rid)
    try:
        with Timer(report, "train"):
            model, loss_trace = train(dist, config)
    except TrainingDiverged as exc:
        ckpt = run_dir / "model.json"
        save_checkpoint(exc.model, ckpt, target_kind=config.target_kind.value,
                        dim=config.dim, diverged_at_step=exc.step)
        write_loss_csv(run_dir / "loss_trace.csv", exc.loss_trace)
        report.error = str(exc)
        report.outputs["checkpoint"] = ckpt.name
        report.outputs["loss_trace"] = "loss_trace.csv"
        report.write(run_dir)
        raise

    ckpt = run_dir / "model.json"
    save_checkpoint(model, ckpt, target_kind=config.target_kind.value, dim=config.dim)
    report.add_output("checkpoint", ckpt)
    loss_csv = run_dir / "loss_trace.csv"
    write_loss_csv(loss_csv, loss_trace)
    report.add_output("loss_trace", loss_csv)
    report.add_output("loss_figure", figures.plot_loss_trace(run_dir / "loss_trace.png", loss_trace))
    report.summary = {
        "steps": len(loss_trace),
        "final_loss": loss_trace[-1],
        "mean_last_100": float(np.mean(loss_trace[-100:])),
    }
    report.write(run_dir)
    print(f"[train] run {rid}: {len(loss_trace)} steps, final loss {loss_trace[-1]:.4g}")
    print(f"[train] artifacts in {run_dir}")
    return 0


# --- sample --------------------------------------------------------------------

def cmd_sample(args) -> int:
    if args.n < 1:
        raise ConfigError(f"--n must be >= 1, got {args.n}")
    dist = build_distribution(args) if args.dist else None
    if args.checkpoint is None and dist is None:
        raise ConfigError("sample needs --checkpoint or --oracle")
    drift, kind = _drift_from_args(args, dist)
    schedule = build_exp_schedule(args.t1, args.T, args.K)

    snap_times = None
    if args.snapshots:
        requested = _parse_floats(args.snapshots)
        snap_times = sorted({0.0 if t <= 0 else float(
            schedule.grid[int(np.argmin(np.abs(schedule.grid - t)))]) for t in requested})

    effective = {
        "command": "sample", "n": args.n, "seed": args.seed,
        "t1": args.t1, "T": args.T, "K": args.K,
        "drift": args.checkpoint or f"exact:{args.dist}",
        "distribution": dist_to_config(dist) if dist is not None else None,
        "snapshots": snap_times, "tol": args.tol,
    }
    rid = run_id(effective)
    run_dir = _make_run_dir(args.out, rid)
    report = ExperimentReport("sample", effective, rid)

    if args.checkpoint:
        model, meta = load_checkpoint(args.checkpoint)
        dim = int(meta.get("dim", model.layer_sizes[-1]))
    else:
        dim = dist.dim
    with Timer(report, "sample"):
        result = backward_sample(drift, schedule, args.n, dim, args.seed,
                                 snapshot_times=snap_times)
    samples, snaps = result if snap_times is not None else (result, {})

    overlay = dist.points if isinstance(dist, PointCloud) else None
    out_csv = run_dir / "samples.csv"
    write_samples_csv(out_csv, samples)
    report.add_output("samples", out_csv)
    if dim == 2:
        report.add_output("samples_figure",
                          figures.plot_samples(run_dir / "samples.png", samples, overlay))
    for t, batch in snaps.items():
        p = run_dir / f"snapshot_t{t:g}.csv"
        write_samples_csv(p, batch)
        report.add_output(f"snapshot_t{t:g}", p)
    if snaps and dim == 2:
        report.add_output("snapshots_figure",
                          figures.plot_snapshots(run_dir / "snapshots.png", snaps, overlay))

    mean, std = sample_moments(samples)
    report.summary = {"mean": mean, "std": std, "drift_kind": kind.value}
    if isinstance(dist, PointCloud):
        freqs, unabsorbed = absorption_frequencies(samples, dist, args.tol)
        fr_csv = run_dir / "frequencies.csv"
        write_frequencies_csv(fr_csv, freqs, unabsorbed, len(samples))
        report.add_output("frequencies", fr_csv)
        report.summary["frequencies"] = freqs
        report.summary["unabsorbed_fraction"] = unabsorbed / len(samples)
    report.write(run_dir)
    print(f"[sample] run {rid}: n={args.n}, mean={np.round(mean, 4).tolist()}, "
          f"std={np.round(std, 4).tolist()}")
    if "unabsorbed_fraction" in report.summary:
        print(f"[sample] unabsorbed fraction at tol {args.tol:g}: "
              f"{report.summary['unabsorbed_fraction']:.4f}")
    print(f"[sample] artifacts in {run_dir}")
    return 0


# --- eval ----------------------------------------------------------------------

def _parse_times(text: str, schedule) -> np.ndarray:
    """Time lists: 'last:N' (grid tail), 'geom:lo,hi,n', or comma floats."""
    if text.startswith("last:"):
        n = int(text.split(":", 1)[1])
        return np.asarray(schedule.grid[-n:], dtype=float)
    if text.startswith("geom:"):
        lo, hi, n = text.split(":", 1)[1].split(",")
        return np.geomspace(float(lo), float(hi), int(n))
    return np.asarray(_parse_floats(text), dtype=float)


def cmd_eval(args) -> int:
    dist = build_distribution(args) if args.dist else None
    if dist is None:
        raise ConfigError("eval needs a distribution (--dist)")
    schedule = build_exp_schedule(args.t1, args.T, args.K)
    times = _parse_times(args.times, schedule)
    if (times <= 0).any() or (times > args.T).any():
        raise ConfigError("times must lie in (0, T]")

    effective = {
        "command": "eval", "mode": args.mode, "seed": args.seed, "n": args.n,
        "distribution": dist_to_config(dist),
        "checkpoint": args.checkpoint, "x": args.x,
        "times": [float(t) for t in times],
        "t1": args.t1, "T": args.T, "K": args.K,
    }
    rid = run_id(effective)
    run_dir = _make_run_dir(args.out, rid)
    report = ExperimentReport("eval", effective, rid)

    if args.mode in ("pointwise", "l2"):
        if not args.checkpoint:
            raise ConfigError(f"--mode {args.mode} compares a checkpoint against "
                              "the exact target; pass --checkpoint")
        model, meta = load_checkpoint(args.checkpoint)
        kind = TargetKind(meta.get("target_kind", "SCORE_S"))
        exact = analytic_target_fn(dist, kind)

        def trained(x, t):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            return mlp_forward(model, np.column_stack([x, np.full(len(x), t)]))

        if args.mode == "pointwise":
            x_eva = _parse_vector(args.x)
            curves = []
            with Timer(report, "eval"):
                norm_curve = pointwise_error(exact, trained, x_eva, times, label="norm")
                curves.append(norm_curve)
                for c in range(dist.dim):
                    curves.append(pointwise_error(exact, trained, x_eva, times,
                                                  component=c, label=f"component {c + 1}"))
            for curve in curves:
                name = curve.label.replace(" ", "_")
                p = run_dir / f"pointwise_{name}.csv"
                curve.to_csv(p)
                report.add_output(f"pointwise_{name}", p)
            report.add_output("pointwise_figure", figures.plot_error_curves(
                run_dir / "pointwise.png", curves, ylabel=f"|{kind.value} error|"))
            report.summary = {"max_error": float(norm_curve.values.max()),
                              "error_at_t1": float(norm_curve.values[0])}
        else:
            values = []
            with Timer(report, "eval"):
                for i, t in enumerate(times):
                    values.append(l2_error_over_p(exact, trained, dist, float(t),
                                                  args.n, seed=args.seed + i))
            curve = ErrorCurve(times, np.asarray(values), label="population mse")
            p = run_dir / "l2_error.csv"
            curve.to_csv(p)
            report.add_output("l2_error", p)
            report.add_output("l2_figure", figures.plot_error_curves(
                run_dir / "l2_error.png", [curve], ylabel="population MSE"))
            report.summary = {"max_error": float(curve.values.max())}

    elif args.mode == "singularity":
        drift, kind = _drift_from_args(args, dist)
        x_eva = _parse_vector(args.x)
        with Timer(report, "eval"):
            curve = singularity_profile(drift, dist, x_eva, times, label="t*S - (x - y)")
        p = run_dir / "singularity_profile.csv"
        curve.to_csv(p)
        report.add_output("profile", p)
        report.add_output("profile_figure", figures.plot_error_curves(
            run_dir / "singularity_profile.png", [curve], ylabel="||t S(x,t) - (x - y)||"))
        report.summary = {"value_at_smallest_t": float(curve.values[0]),
                          "drift_kind": kind.value}

    elif args.mode == "lambda":
        if args.checkpoint:
            model, meta = load_checkpoint(args.checkpoint)
            if TargetKind(meta.get("target_kind", "")) is not TargetKind.COND_EXP_F:
                raise ConfigError("lambda mode needs a COND_EXP_F checkpoint")

            def f_provider(x, t):
                x = np.atleast_2d(np.asarray(x, dtype=float))
                return mlp_forward(model, np.column_stack([x, np.full(len(x), t)]))
        else:
            f_provider = analytic_target_fn(dist, TargetKind.COND_EXP_F)
        with Timer(report, "eval"):
            curve = lambda_true_estimate(dist, f_provider, times, args.n, args.seed)
            c_fit, quality = fit_lambda_constant(curve)
        p = run_dir / "lambda_true.csv"
        curve.to_csv(p)
        report.add_output("lambda_true", p)
        report.add_output("lambda_figure", figures.plot_lambda_fit(
            run_dir / "lambda_fit.png", curve, c_fit))
        report.summary = {"C": c_fit, "fit_quality": quality}
        print(f"[eval] lambda fit: C={c_fit:.4g}, quality={quality:.4f}")
    else:
        raise ConfigError(f"unknown mode {args.mode!r}")

    report.write(run_dir)
    print(f"[eval] run {rid}: artifacts in {run_dir}")
    return 0


# --- t1 sweep --------------------------------------------------------------------

def cmd_t1_sweep(args) -> int:
    dist = build_distribution(args)
    if not isinstance(dist, PointCloud):
        raise ConfigError("t1-sweep needs a point-cloud distribution")
    t1_values = _parse_floats(args.t1_list)
    if not t1_values:
        raise ConfigError("empty t1 list")
    bad = [t for t in t1_values if not 0.0 < t < args.T]
    if bad:
        raise ConfigError(f"t1 values outside (0, T): {bad}")

    effective = {
        "command": "t1-sweep", "t1_values": t1_values, "n": args.n,
        "seed": args.seed, "T": args.T, "K": args.K, "tol": args.tol,
        "distribution": dist_to_config(dist),
    }
    rid = run_id(effective)
    run_dir = _make_run_dir(args.out, rid)
    report = ExperimentReport("t1-sweep", effective, rid)

    drift = as_score(TargetKind.COND_EXP_F, analytic_target_fn(dist, TargetKind.COND_EXP_F))
    rows = []
    batches = {}
    with Timer(report, "sweep"):
        for t1 in t1_values:
            schedule = build_exp_schedule(t1, args.T, args.K)
            samples = backward_sample(drift, schedule, args.n, dist.dim, args.seed)
            freqs, unabsorbed = absorption_frequencies(samples, dist, args.tol)
            p = run_dir / f"samples_t1_{t1:g}.csv"
            write_samples_csv(p, samples)
            report.add_output(f"samples_t1_{t1:g}", p)
            rows.append((t1, unabsorbed / args.n, freqs))
            batches[f"t1 = {t1:g}"] = samples

    import csv as _csv
    summary_csv = run_dir / "sweep_summary.csv"
    with open(summary_csv, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["t1", "unabsorbed_fraction"] +
                        [f"freq_{i + 1}" for i in range(len(dist.points))])
        for t1, unabs, freqs in rows:
            writer.writerow([repr(float(t1)), repr(float(unabs))] +
                            [repr(float(f)) for f in freqs])
    report.add_output("summary", summary_csv)
    if dist.dim == 2:
        report.add_output("sweep_figure", figures.plot_sample_grid(
            run_dir / "sweep.png", batches, overlay=dist.points))
    report.summary = {"unabsorbed_by_t1": {f"{t1:g}": u for t1, u, _ in rows}}
    report.write(run_dir)
    for t1, unabs, _ in rows:
        print(f"[t1-sweep] t1={t1:g}: unabsorbed fraction {unabs:.4f}")
    print(f"[t1-sweep] run {rid}: artifacts in {run_dir}")
    return 0


# --- argument parsing ---------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftlab",
        description="Desk-scale diffusion sampling lab: train, sample, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a drift network from a JSON config")
    p_train.add_argument("--config", required=True, help="JSON file with 'run' and 'distribution'")
    p_train.add_argument("--out", default="runs", help="output root directory")
    p_train.set_defaults(func=cmd_train)

    p_sample = sub.add_parser("sample", help="generate samples with the reverse sampler")
    src = p_sample.add_mutually_exclusive_group(required=True)
    src.add_argument("--checkpoint", help="trained model JSON")
    src.add_argument("--oracle", dest="dist", choices=_DIST_NAMES,
                     help="exact drift for this distribution")
    p_sample.add_argument("--mu", help="gaussian mean, comma separated")
    p_sample.add_argument("--sigma", type=float, help="gaussian/smoothing scale")
    p_sample.add_argument("--csv", help="point-cloud CSV")
    p_sample.add_argument("--csv-weights", action="store_true")
    p_sample.add_argument("--n", type=int, required=True, help="number of samples")
    p_sample.add_argument("--seed", type=int, default=0)
    _schedule_args(p_sample)
    p_sample.add_argument("--snapshots", help="comma list of times to snapshot "
                                              "(snapped to the grid; 0 = final)")
    p_sample.add_argument("--tol", type=float, default=1e-2,
                          help="absorption tolerance for point-cloud targets")
    p_sample.add_argument("--out", default="runs")
    p_sample.set_defaults(func=cmd_sample)

    p_eval = sub.add_parser("eval", help="error curves and fits against exact targets")
    p_eval.add_argument("--mode", required=True,
                        choices=("pointwise", "l2", "singularity", "lambda"))
    p_eval.add_argument("--checkpoint", help="trained model JSON")
    _dist_args(p_eval)
    p_eval.add_argument("--x", default="1,-0.1", help="evaluation point, comma separated")
    p_eval.add_argument("--times", default="last:100",
                        help="'last:N' grid tail, 'geom:lo,hi,n', or comma list")
    p_eval.add_argument("--n", type=int, default=100_000, help="Monte-Carlo samples per time")
    p_eval.add_argument("--seed", type=int, default=0)
    _schedule_args(p_eval)
    p_eval.add_argument("--out", default="runs")
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser("t1-sweep", help="sweep the first grid time with exact drift")
    _dist_args(p_sweep)
    p_sweep.set_defaults(dist="twenty-point")
    p_sweep.add_argument("--t1", dest="t1_list", required=True,
                         help="comma list of t1 values")
    p_sweep.add_argument("--n", type=int, default=10_000)
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--T", type=float, default=10.0)
    p_sweep.add_argument("--K", type=int, default=200)
    p_sweep.add_argument("--tol", type=float, default=1e-2)
    p_sweep.add_argument("--out", default="runs")
    p_sweep.set_defaults(func=cmd_t1_sweep)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DriftLabError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
