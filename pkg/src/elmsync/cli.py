"""Command-line front end.

    elmsync train CONFIG [--model PATH]
    elmsync eval CONFIG [--model PATH] [--fs-learn-model PATH]
    elmsync sweep CONFIG --axis {L,Ns,M,hpa,eta} --values 4,6,8
    elmsync generalize CONFIG --axis {L,eta,hpa} --train-value 4 --test-values 4,6,8
    elmsync ablate CONFIG

Exit status: 0 on success, 2 for usage/config/model-compatibility errors,
1 for anything else.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__, elm, harness
from .config import ConfigError, load_config

log = logging.getLogger("elmsync")

OUT_ENV = "ELMSYNC_OUT"


class UsageError(Exception):
    pass


def _common(p):
    p.add_argument("config", help="TOML experiment file")
    p.add_argument("--seed-data", type=int)
    p.add_argument("--seed-model", type=int)
    p.add_argument("--seed-eval", type=int)
    p.add_argument("--profile", choices=sorted(harness.PROFILES),
                   help="desk (Nt=2e4, 640 hidden) or paper (Nt=1e5, 1280 hidden)")
    p.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV} or ./runs)")
    p.add_argument("--plot", action="store_true", help="also write SVG curves next to each CSV")
    p.add_argument("--workers", type=int, default=1, help="threads for evaluation blocks")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="elmsync", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"elmsync {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="generate a training set, fit and save a model")
    _common(p)
    p.add_argument("--model", type=Path, help="model output path (default OUT/model.elm)")
    p.add_argument("--method", choices=sorted(harness.MODEL_FEATURES), default="prop")

    p = sub.add_parser("eval", help="error probability over the SNR grid")
    _common(p)
    p.add_argument("--model", type=Path, help="trained prop model")
    p.add_argument("--fs-learn-model", type=Path, help="trained fs_learn model")

    p = sub.add_parser("sweep", help="retrain and evaluate over one parameter")
    _common(p)
    p.add_argument("--axis", required=True, choices=harness.AXES)
    p.add_argument("--values", required=True, help="comma-separated axis values")

    p = sub.add_parser("generalize", help="train at one parameter value, test at others")
    _common(p)
    p.add_argument("--axis", required=True, choices=("L", "eta", "hpa"))
    p.add_argument("--train-value", required=True)
    p.add_argument("--test-values", required=True, help="comma-separated axis values")

    p = sub.add_parser("ablate", help="corr vs prop vs fs_learn (no preprocessing)")
    _common(p)
    return parser


def resolve_config(args) -> harness.ExperimentConfig:
    try:
        cfg = load_config(args.config)
    except FileNotFoundError:
        raise UsageError(f"config not found: {args.config}") from None
    changes = {}
    for name in ("seed_data", "seed_model", "seed_eval"):
        if getattr(args, name) is not None:
            changes[name] = getattr(args, name)
    try:
        if changes:
            cfg = dataclasses.replace(cfg, **changes)
        if args.profile:
            cfg = cfg.with_profile(args.profile)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def out_dir(args) -> Path:
    out = args.out or Path(os.environ.get(OUT_ENV, "runs"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(out: Path, command: str, cfg, extra=None):
    manifest = {
        "command": command,
        "config": dataclasses.asdict(cfg),
        "config_hash": harness.config_hash(cfg),
        "output_dir": str(out),
        "tool_version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    manifest.update(extra or {})
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return path


def write_result(result, path: Path, expected_rows: int, plot: bool):
    if path.exists():
        path.unlink()
    result.to_csv(path)
    back = harness.SweepResult.from_csv(path)
    if len(back.rows) != expected_rows:
        raise RuntimeError(f"{path}: wrote {len(back.rows)} rows, expected {expected_rows}")
    if plot:
        from .plotting import plot_result

        plot_result(result, path.with_suffix(".svg"))
    log.info("wrote %s", path)


def _load_for(cfg, path, method):
    if path is None:
        raise UsageError(f"method {method!r} needs a model (--{'model' if method == 'prop' else 'fs-learn-model'})")
    try:
        model = elm.load_model(path)
    except FileNotFoundError:
        raise UsageError(f"model not found: {path}") from None
    except elm.ModelFormatError as exc:
        raise UsageError(str(exc)) from None
    try:
        harness.check_model(cfg, model, method)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return model


def cmd_train(args):
    cfg = resolve_config(args)
    out = out_dir(args)
    model_path = args.model or out / "model.elm"
    write_manifest(out, "train", cfg, {"model_path": str(model_path), "method": args.method})
    model = harness.train_model(cfg, args.method)
    model_path.parent.mkdir(parents=True, exist_ok=True)
    elm.save_model(model, model_path)
    elm.load_model(model_path)
    log.info("wrote %s", model_path)
    return 0


def cmd_eval(args):
    cfg = resolve_config(args)
    models = {}
    if "prop" in cfg.methods:
        models["prop"] = _load_for(cfg, args.model, "prop")
    if "fs_learn" in cfg.methods:
        models["fs_learn"] = _load_for(cfg, args.fs_learn_model, "fs_learn")
    out = out_dir(args)
    write_manifest(out, "eval", cfg, {"model": str(args.model), "fs_learn_model": str(args.fs_learn_model)})
    result = harness.evaluate(cfg, models, workers=args.workers)
    write_result(result, out / "results.csv", len(cfg.methods) * len(cfg.snr_grid), args.plot)
    return 0


def _values(axis, text):
    try:
        return [harness.parse_axis_value(axis, v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_sweep(args):
    cfg = resolve_config(args)
    values = _values(args.axis, args.values)
    if not values:
        raise UsageError("--values is empty")
    try:
        for v in values:
            harness.with_axis(cfg, args.axis, v)
    except ValueError as exc:
        raise ConfigError(f"axis {args.axis}={v}: {exc}") from None
    out = out_dir(args)
    write_manifest(out, "sweep", cfg, {"axis": args.axis, "values": values})
    per_value = len(cfg.methods) * len(cfg.snr_grid)
    results = []
    for v, res in harness.run_axis_sweep(cfg, args.axis, values, workers=args.workers):
        write_result(res, out / f"sweep_{args.axis}_{v}.csv", per_value, args.plot)
        results.append(res)
    merged = harness.SweepResult.merge(results)
    write_result(merged, out / f"sweep_{args.axis}.csv", per_value * len(values), args.plot)
    return 0


def cmd_generalize(args):
    cfg = resolve_config(args)
    train_v = _values(args.axis, args.train_value)
    tests = _values(args.axis, args.test_values)
    if len(train_v) != 1 or not tests:
        raise UsageError("need exactly one --train-value and at least one --test-values entry")
    train_cfg = harness.with_axis(cfg, args.axis, train_v[0])
    out = out_dir(args)
    write_manifest(out, "generalize", train_cfg, {"axis": args.axis, "train_value": train_v[0], "test_values": tests})
    models = harness.train_models(train_cfg)
    results = [
        harness.run_generalization(train_cfg, harness.with_axis(cfg, args.axis, v), models, workers=args.workers)
        for v in tests
    ]
    merged = harness.SweepResult.merge(results)
    write_result(merged, out / f"generalize_{args.axis}.csv",
                 len(cfg.methods) * len(cfg.snr_grid) * len(tests), args.plot)
    return 0


def cmd_ablate(args):
    cfg = dataclasses.replace(resolve_config(args), methods=("corr", "prop", "fs_learn"))
    out = out_dir(args)
    write_manifest(out, "ablate", cfg, {"fs_learn_input": "unit-norm [Re y, Im y], length 2M"})
    result = harness.run_sweep(cfg, workers=args.workers)
    write_result(result, out / "ablation.csv", 3 * len(cfg.snr_grid), args.plot)
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "generalize": cmd_generalize,
    "ablate": cmd_ablate,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"elmsync {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        log.debug("failure", exc_info=True)
        print(f"elmsync {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
