"""Command-line interface: one subcommand per pipeline stage plus ``pipeline``.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 internal
invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import DEFAULT_PATH, ENV_VAR, ConfigError, format_config, load_config
from .datagen import (
    Dataset,
    DatasetError,
    Provenance,
    balanced_sample,
    generate_grid,
    label_grid,
    make_pseudo_experimental,
    read_dataset,
    split,
    write_dataset,
)
from .estimation import GridSpec, grid_search, rank, write_scores
from .mlp import MlpModel, TrainConfig, evaluate, lambda_sweep, load_model, save_model, train
from .physics import CoefficientPair, LaunchConfig
from .plotting import write_trajectory_svg
from .trajectory import deviation, landing_range, score, simulate

log = logging.getLogger("forcefit")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_INVARIANT = 0, 1, 2, 3

METRIC_COLUMNS = ("overall_acc", "f1_3pt", "f1_2pt")

# arguments that cannot change results; the config enters the digest by content
_RUN_ID_EXCLUDED = ("func", "out_dir", "threads", "config", "verbose")


class InvariantError(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _pair(text):
    try:
        return CoefficientPair.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_metrics(path, rows, key):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow((key,) + METRIC_COLUMNS)
        for value, metrics in rows:
            writer.writerow([repr(value)] + [repr(v) for v in metrics.as_row()])


def _check_outcomes(data: Dataset):
    if ((data.Y[:, 1] == 1) & (data.Y[:, 0] == 0)).any():
        raise InvariantError("generated a 3-point hit without a 2-point hit")


# -- subcommands ----------------------------------------------------------------


def cmd_simulate(args, ctx):
    config = LaunchConfig(args.distance, args.motor, args.angle)
    coeffs = CoefficientPair(args.cl, args.cd)
    traj = simulate(config, coeffs, ctx)
    outcome = score(traj, config, ctx.target)
    summary = {
        "terminated_by": traj.terminated_by.label,
        "steps": len(traj),
        "hit2": int(outcome.hit2),
        "hit3": int(outcome.hit3),
        "deviation_m": deviation(traj, config, ctx.target),
    }
    # x where the ball comes back down through launch height / the floor, when it does
    for key, level in (("range_m", 0.0), ("floor_x_m", ctx.floor_y)):
        try:
            summary[key] = landing_range(traj, level)
        except ValueError:
            pass
    print(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in summary.items()))
    if args.csv:
        traj.to_csv(args.csv)
    if args.svg:
        title = f"d={args.distance:g} m, motor={args.motor:g}, angle={args.angle:g} deg, Cl={args.cl:g}, Cd={args.cd:g}"
        write_trajectory_svg(args.svg, traj, config.distance, ctx.target, ctx.floor_y, title)


def _grids(args):
    lift = GridSpec(args.grid_min, args.grid_max, args.grid_step)
    drag = None
    if args.drag_min is not None or args.drag_max is not None or args.drag_step is not None:
        drag = GridSpec(
            args.grid_min if args.drag_min is None else args.drag_min,
            args.grid_max if args.drag_max is None else args.drag_max,
            args.grid_step if args.drag_step is None else args.drag_step,
        )
    return lift, drag


def _estimate(data, args, ctx):
    lift, drag = _grids(args)
    scores = rank(grid_search(data, lift, ctx, workers=args.threads, drop_min=args.drop_min, drag_grid=drag))
    return scores


def cmd_estimate(args, ctx):
    data = read_dataset(args.data, Provenance.EXPERIMENTAL)
    scores = _estimate(data, args, ctx)
    log.info("evaluated %d coefficient pairs", len(scores))
    write_scores(scores[: args.top] if args.top else scores, args.out)
    best = scores[0]
    print(
        f"cl={best.pair.lift!r} cd={best.pair.drag!r} acc3={best.acc3:.4f} acc2={best.acc2:.4f} "
        f"mean_dev={best.mean_dev:.4g} median_dev={best.median_dev:.4g}"
    )


def cmd_generate(args, ctx):
    data = label_grid(generate_grid(), args.coeffs, ctx, workers=args.threads)
    _check_outcomes(data)
    write_dataset(data, args.out)
    counts = data.class_counts()
    print(f"rows={len(data)} miss={counts[0]} two_pt={counts[1]} three_pt={counts[2]}")


def cmd_sample(args, ctx):
    pool = read_dataset(args.pool, Provenance.SIMULATED)
    exclude = read_dataset(args.exclude) if args.exclude else None
    write_dataset(balanced_sample(pool, args.n, exclude, args.seed), args.out)


def cmd_split(args, ctx):
    data = read_dataset(args.data)
    train_set, test_set = split(data, args.test_frac, args.seed, stratify=not args.no_stratify)
    write_dataset(train_set, args.out_train)
    write_dataset(test_set, args.out_test)
    print(f"train={len(train_set)} test={len(test_set)}")


def cmd_pseudo(args, ctx):
    data = make_pseudo_experimental(
        args.n, args.coeffs, ctx, noise=args.noise, seed=args.seed, deformation=args.deformation
    )
    write_dataset(data, args.out)


def _train_config(args):
    return TrainConfig(
        learning_rate=args.lr, batch_size=args.batch_size, lam=args.lam, epochs=args.epochs, seed=args.seed
    )


def cmd_train(args, ctx):
    real = read_dataset(args.real, Provenance.EXPERIMENTAL)
    sim = read_dataset(args.sim, Provenance.SIMULATED) if args.sim else Dataset.empty()
    cfg = _train_config(args)
    model, history = train(MlpModel.initialize(cfg.seed), real, sim, cfg)
    save_model(model, args.out_model, {"train_config": cfg.__dict__, "final_loss": history[-1] if history else None})
    if history:
        print(f"epochs={len(history)} final_loss={history[-1]:.6g}")


def cmd_evaluate(args, ctx):
    model = load_model(args.model)
    data = read_dataset(args.data)
    m = evaluate(model, data)
    print(f"overall_acc={m.overall_acc:.4f} f1_3pt={m.f1_3pt:.4f} f1_2pt={m.f1_2pt:.4f}")


def cmd_sweep_lambda(args, ctx):
    real = read_dataset(args.real, Provenance.EXPERIMENTAL)
    sim = read_dataset(args.sim, Provenance.SIMULATED)
    test = read_dataset(args.test)
    rows = lambda_sweep(real, sim, test, args.lambdas, _train_config(args))
    _write_metrics(args.out, rows, "lambda")
    for lam, m in rows:
        print(f"lambda={lam:g} overall_acc={m.overall_acc:.4f}")


def sim_size_sweep(real, pool, test, sizes, cfg, exclude=None):
    rows = []
    for size in sizes:
        sim = balanced_sample(pool, size, exclude if exclude is not None else real, cfg.seed) if size else Dataset.empty()
        model, _ = train(MlpModel.initialize(cfg.seed), real, sim, cfg)
        rows.append((size, evaluate(model, test)))
    return rows


def cmd_sweep_simsize(args, ctx):
    real = read_dataset(args.real, Provenance.EXPERIMENTAL)
    pool = read_dataset(args.pool, Provenance.SIMULATED)
    test = read_dataset(args.test)
    exclude = read_dataset(args.exclude) if args.exclude else real
    rows = sim_size_sweep(real, pool, test, args.sizes, _train_config(args), exclude)
    _write_metrics(args.out, rows, "sim_size")
    for size, m in rows:
        print(f"sim_size={size} overall_acc={m.overall_acc:.4f}")


def cmd_pipeline(args, ctx, config_values, config_path):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = _train_config(args)
    stages = []
    artifacts = {}

    def stage(name, fn):
        start = time.perf_counter()
        result = fn()
        stages.append({"stage": name, "seconds": round(time.perf_counter() - start, 3)})
        log.info("stage %s done in %.1fs", name, stages[-1]["seconds"])
        return result

    def save(name, data):
        path = out / name
        write_dataset(data, path)
        artifacts[name] = _sha256(path)

    real = stage(
        "make-pseudo-experimental",
        lambda: make_pseudo_experimental(
            args.n_real, args.truth_coeffs, ctx, args.noise, args.seed, deformation=args.deformation
        ),
    )
    save("pseudo_experimental.csv", real)
    train_set, test_set = stage("split", lambda: split(real, args.test_frac, args.seed))
    save("train.csv", train_set)
    save("test.csv", test_set)
    scores = stage("estimate", lambda: _estimate(train_set, args, ctx))
    write_scores(scores[:50], out / "estimate.csv")
    artifacts["estimate.csv"] = _sha256(out / "estimate.csv")
    pair = scores[0].pair
    pool = stage("generate", lambda: label_grid(generate_grid(), pair, ctx, workers=args.threads))
    _check_outcomes(pool)
    sim = stage(
        "sample", lambda: balanced_sample(pool, args.sim_size, real, args.seed) if args.sim_size else Dataset.empty()
    )
    save("sim_sample.csv", sim)
    model, history = stage("train", lambda: train(MlpModel.initialize(cfg.seed), train_set, sim, cfg))
    metrics = stage("evaluate", lambda: evaluate(model, test_set))

    run_id = hashlib.sha256(
        json.dumps(
            {
                "config": format_config(config_values),
                "args": {k: str(v) for k, v in sorted(vars(args).items()) if k not in _RUN_ID_EXCLUDED},
                "artifacts": artifacts,
            },
            sort_keys=True,
        ).encode()
    ).hexdigest()
    save_model(model, out / "model.json", {"run_id": run_id, "train_config": cfg.__dict__})
    artifacts["model.json"] = _sha256(out / "model.json")
    manifest = {
        "run_id": run_id,
        "tool": "forcefit",
        "version": __version__,
        "seed": args.seed,
        "config_path": str(config_path),
        "config": config_values,
        "inputs": {str(config_path): _sha256(config_path)},
        "estimated_coeffs": {"cl": pair.lift, "cd": pair.drag},
        "estimate_best": dict(zip(("acc3", "acc2", "mean_dev", "median_dev"), scores[0].as_row()[2:])),
        "metrics": dict(zip(METRIC_COLUMNS, metrics.as_row())),
        "artifacts": artifacts,
        "versions": {"python": platform.python_version(), "numpy": np.__version__},
        "stages": stages,
        "created": datetime.now(timezone.utc).isoformat(),
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, default=str)
        fh.write("\n")
    print(
        f"run_id={run_id} cl={pair.lift!r} cd={pair.drag!r} overall_acc={metrics.overall_acc:.4f} "
        f"f1_3pt={metrics.f1_3pt:.4f} f1_2pt={metrics.f1_2pt:.4f}"
    )


# -- argument parsing -------------------------------------------------------------


def _add_grid_args(p, lift=(0.0, 5.0, 0.005), drag=(None, None, None)):
    p.add_argument("--grid-min", type=float, default=lift[0])
    p.add_argument("--grid-max", type=float, default=lift[1])
    p.add_argument("--grid-step", type=float, default=lift[2])
    p.add_argument("--drag-min", type=float, default=drag[0], help="separate drag axis (defaults to the --grid-* values)")
    p.add_argument("--drag-max", type=float, default=drag[1])
    p.add_argument("--drag-step", type=float, default=drag[2])
    p.add_argument("--drop-min", action="store_true", help="drop each axis' minimum (1000 values per axis on the default grid)")


def _add_train_args(p, lam=True):
    if lam:
        p.add_argument("--lambda", dest="lam", type=float, default=0.01, help="weight of the simulated loss term")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=10)


def build_parser():
    parser = _Parser(prog="forcefit", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help=f"key=value physics config (default: ${ENV_VAR}, then built-in values)")
    parser.add_argument("--threads", type=int, default=1, help="worker processes for grid search and labelling")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate one launch")
    p.add_argument("--distance", type=float, default=5.0, help="m")
    p.add_argument("--motor", type=float, default=0.6, help="motor speed ratio in [0, 1]")
    p.add_argument("--angle", type=float, default=45.0, help="degrees")
    p.add_argument("--cl", type=float, default=0.06)
    p.add_argument("--cd", type=float, default=0.91)
    p.add_argument("--csv", help="write t,x,y,vx,vy states here")
    p.add_argument("--svg", help="write a plot here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="grid-search the lift/drag pair against labelled launches")
    p.add_argument("--data", required=True)
    _add_grid_args(p)
    p.add_argument("--top", type=int, default=0, help="keep only the best K rows (0 = all)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("generate", help="label the full configuration grid")
    p.add_argument("--coeffs", type=_pair, required=True, help="cl,cd")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("sample", help="class-balanced sample from a labelled pool")
    p.add_argument("--pool", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--exclude", help="dataset whose configurations must not be drawn")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("split", help="train/test split")
    p.add_argument("--data", required=True)
    p.add_argument("--test-frac", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-stratify", action="store_true")
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("make-pseudo-experimental", help="stand-in for measured launches")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--coeffs", type=_pair, required=True, help="cl,cd of the hidden ball")
    p.add_argument("--noise", type=float, default=0.0, help="label flip probability")
    p.add_argument("--deformation", type=float, default=0.0, help="per-launch coefficient drift with motor ratio")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pseudo)

    p = sub.add_parser("train", help="train the 3-8-2 network")
    p.add_argument("--real", required=True)
    p.add_argument("--sim", help="simulated dataset (omit for real-only training)")
    _add_train_args(p)
    p.add_argument("--out-model", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="accuracy and F1 of a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-lambda", help="one model per simulated-loss weight")
    p.add_argument("--real", required=True)
    p.add_argument("--sim", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--lambdas", type=_float_list, default=[0, 0.001, 0.01, 0.1, 0.5, 1.0])
    _add_train_args(p, lam=False)
    p.set_defaults(lam=0.01)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_lambda)

    p = sub.add_parser("sweep-simsize", help="one model per simulated-set size")
    p.add_argument("--real", required=True)
    p.add_argument("--pool", required=True, help="labelled grid to sample simulated sets from")
    p.add_argument("--test", required=True)
    p.add_argument("--exclude", help="configurations never to sample (default: --real)")
    p.add_argument("--sizes", type=_int_list, default=[0, 500, 600, 750, 900, 1000, 1250])
    _add_train_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_simsize)

    p = sub.add_parser("pipeline", help="pseudo-experimental data -> estimate -> generate -> train -> evaluate")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--truth-coeffs", type=_pair, default=CoefficientPair(0.08, 0.75), help="hidden ball's cl,cd")
    p.add_argument("--deformation", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--n-real", type=int, default=100)
    p.add_argument("--test-frac", type=float, default=0.2)
    p.add_argument("--sim-size", type=int, default=900)
    # a desk-scale window around plausible coefficients; the full 0-5 grid takes hours
    _add_grid_args(p, lift=(0.0, 0.2, 0.01), drag=(0.5, 1.5, 0.05))
    _add_train_args(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        config_path = args.config or os.environ.get(ENV_VAR)
        if args.command == "pipeline":
            config_path = config_path or DEFAULT_PATH
        ctx, values = load_config(config_path)
        if args.command == "pipeline":
            args.func(args, ctx, values, config_path)
        else:
            args.func(args, ctx)
    except (ConfigError, DatasetError, ValueError) as exc:
        print(f"forcefit: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"forcefit: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvariantError, AssertionError) as exc:
        print(f"forcefit: internal error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
