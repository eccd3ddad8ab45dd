"""Command-line entry point: ``depscale <command> [options]``.

Every option can also come from an environment variable named
``DEPSCALE_<OPTION>`` (e.g. ``DEPSCALE_SEED=3``); an explicit flag wins.
Exit status: 0 ok, 2 missing input, 3 invalid input, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import __version__, pipeline
from .errors import MissingInputError, NumericalError, SessionMismatchError, ValidationError

ENV_PREFIX = "DEPSCALE_"
COMMANDS = ("synth", "extract", "encode", "train", "predict", "fuse", "eval", "pipeline")

EXIT_OK = 0
EXIT_MISSING = 2
EXIT_INVALID = 3
EXIT_NUMERIC = 4

# (flag, type, default, help)
OPTIONS = [
    ("out", str, "out", "output directory for all artifacts"),
    ("manifest", str, None, "session manifest JSON (default: <out>/corpus/manifest.json)"),
    ("seed", int, 0, "root seed; per-stage seeds are derived from it"),
    ("jobs", int, 1, "worker processes for per-session and per-item work"),
    ("k", int, 64, "GMM components for the Fisher encoding"),
    ("subsample", int, 3, "keep every n-th valid video frame for descriptors"),
    ("fps", float, 30.0, "video frame rate"),
    ("fusion", str, None, "fusion spec: max | weighted_mean:audio=0.25,text=0.25,..."),
    ("grid", str, pipeline.DEFAULT_GRID, "SVM grid: c=lo:hi:step;g=lo:hi:step;k=rbf,linear"),
    ("modalities", str, None, "comma list from " + ",".join(pipeline.ALL_MODALITIES)),
    ("sessions", int, 40, "synthetic sessions to generate"),
    ("duration", float, 60.0, "synthetic session length in seconds"),
    ("folds", int, 5, "cross-validation folds"),
    ("weight_step", float, 0.1, "fusion weight grid resolution"),
    ("log_level", str, "WARNING", "logging level"),
]


def _env_default(name, kind, default):
    raw = os.environ.get(ENV_PREFIX + name.upper())
    if raw is None:
        return default
    try:
        return kind(raw)
    except ValueError:
        raise ValidationError(f"{ENV_PREFIX}{name.upper()}={raw!r} is not a valid {kind.__name__}") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="depscale", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    for name, kind, default, help_text in OPTIONS:
        common.add_argument("--" + name.replace("_", "-"), dest=name, type=kind,
                            default=_env_default(name, kind, default), help=help_text)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "synth": "generate a synthetic corpus under <out>/corpus",
        "extract": "per-session features and descriptors",
        "encode": "fit the GMM and write Fisher-vector features",
        "train": "grid-searched per-item SVM ensembles",
        "predict": "predicted PHQ-8 totals per modality",
        "fuse": "late fusion of per-modality predictions",
        "eval": "RMSE/MAE reports against the labels",
        "pipeline": "run every stage in order",
    }
    for cmd in COMMANDS:
        p = sub.add_parser(cmd, parents=[common], help=helps[cmd])
        if cmd == "eval":
            p.add_argument("--predictions", nargs="+", default=None,
                           help="prediction CSVs (default: everything under <out>/predictions)")
            p.add_argument("--truth", default=None,
                           help="label table (default: <out>/labels.csv)")
    return parser


def config_from_args(args):
    modalities = None
    if args.modalities:
        modalities = tuple(m.strip() for m in args.modalities.split(",") if m.strip())
    return pipeline.RunConfig(
        out=args.out, manifest=args.manifest, seed=args.seed, jobs=args.jobs, k=args.k,
        subsample=args.subsample, fps=args.fps, grid=args.grid, fusion=args.fusion,
        modalities=modalities, sessions=args.sessions, duration=args.duration,
        folds=args.folds, weight_step=args.weight_step,
    )


def run(command, cfg, args=None):
    if command == "synth":
        path = pipeline.run_synth(cfg)
        print(f"corpus written: {path}")
    elif command == "extract":
        ids = pipeline.run_extract(cfg)
        print(f"extracted {len(ids)} sessions")
    elif command == "encode":
        model = pipeline.run_encode(cfg)
        print(f"GMM K={model.K} D={model.D} converged={model.converged}")
    elif command == "train":
        trained = pipeline.run_train(cfg)
        print("trained: " + ", ".join(trained))
    elif command == "predict":
        preds = pipeline.run_predict(cfg)
        print("predicted: " + ", ".join(preds))
    elif command == "fuse":
        fused = pipeline.run_fuse(cfg)
        print(f"fused {len(fused)} sessions")
    elif command in ("eval", "pipeline"):
        if command == "eval":
            rows = pipeline.run_eval(cfg, getattr(args, "predictions", None),
                                     getattr(args, "truth", None))
        else:
            rows = pipeline.run_pipeline(cfg)
        for r in rows:
            print(f"{r.name:14s} {r.split:6s} n={r.n:3d} RMSE={r.rmse:.4f} MAE={r.mae:.4f}")
    return EXIT_OK


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except ValidationError as exc:  # bad environment override
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        return run(args.command, cfg, args)
    except MissingInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except SessionMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("symmetric difference: " + " ".join(exc.symmetric_difference), file=sys.stderr)
        return EXIT_INVALID
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
