"""Command-line interface.

Every subcommand honors --config (JSON run configuration), --seed
(overrides the config seed) and --out (artifact directory).  Artifacts
embed the effective config and its hash, so runs are reproducible and
resumable only against the same configuration.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import pipeline
from .config import load_config
from .errors import ContractViolation, FormatError, NumericFault, PipelineError, UndefinedMetricError


def _common(parser: argparse.ArgumentParser, out_required: bool = True) -> None:
    parser.add_argument("--config", type=Path, default=None, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    if out_required:
        parser.add_argument("--out", type=Path, required=True, help="artifact output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scanpathlab",
        description="Scanpath prediction, scanpath-guided classification and their evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate a synthetic dataset")
    _common(p)

    p = sub.add_parser("train-predictor", help="train the scanpath predictor")
    _common(p)

    p = sub.add_parser("predict-scanpaths", help="greedy-decode scanpaths for a dataset")
    _common(p)
    p.add_argument("--ckpt", type=Path, required=True, help="predictor checkpoint directory")
    p.add_argument("--split", choices=("train", "valid", "test"), default=None,
                   help="restrict to one split (default: all images)")

    p = sub.add_parser("train-classifier", help="train the disease classifier")
    _common(p)
    p.add_argument("--scanpaths", type=Path, default=None,
                   help="generated.jsonl (required when scanpath_source=generated)")
    p.add_argument("--variant", choices=("with", "without"), default="with",
                   help="with scanpath guidance or the visual-only baseline")

    p = sub.add_parser("classify", help="write per-class probabilities for a split")
    _common(p)
    p.add_argument("--ckpt", type=Path, required=True, help="classifier checkpoint directory")
    p.add_argument("--split", choices=("train", "valid", "test"), default="test")
    p.add_argument("--scanpaths", type=Path, default=None,
                   help="generated.jsonl (required when scanpath_source=generated)")

    p = sub.add_parser("eval-scanpaths", help="Set-1/Set-2 scanpath similarity report")
    _common(p)
    p.add_argument("--generated", type=Path, required=True, help="generated.jsonl to evaluate")
    p.add_argument("--split", choices=("train", "valid", "test"), default="test")

    p = sub.add_parser("eval-classifier", help="with/without scanpath comparison report")
    _common(p)
    p.add_argument("--with-scores", type=Path, required=True, dest="with_scores")
    p.add_argument("--without-scores", type=Path, required=True, dest="without_scores")
    p.add_argument("--split", choices=("train", "valid", "test"), default="test")

    p = sub.add_parser("gradcheck", help="finite-difference gradient integrity suite")
    _common(p, out_required=False)
    p.add_argument("--seeds", type=int, default=20, help="seeds per check")
    p.add_argument("--tol", type=float, default=1e-4, help="relative error tolerance")

    p = sub.add_parser("run-all", help="full pipeline: predictor, scanpaths, classifiers, reports")
    _common(p)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {"seed": args.seed} if args.seed is not None else None
        cfg = load_config(args.config, overrides)
        if args.command == "gen-synth":
            pipeline.cmd_gen_synth(cfg, args.out)
            print(f"dataset written to {args.out}")
        elif args.command == "train-predictor":
            ckpt = pipeline.cmd_train_predictor(cfg, args.out)
            print(f"predictor checkpoint at {ckpt}")
        elif args.command == "predict-scanpaths":
            path = pipeline.cmd_predict_scanpaths(cfg, args.ckpt, args.out, args.split)
            print(f"generated scanpaths at {path}")
        elif args.command == "train-classifier":
            ckpt = pipeline.cmd_train_classifier(cfg, args.out, args.scanpaths, args.variant)
            print(f"classifier checkpoint at {ckpt}")
        elif args.command == "classify":
            path = pipeline.cmd_classify(cfg, args.ckpt, args.out, args.split, args.scanpaths)
            print(f"scores at {path}")
        elif args.command == "eval-scanpaths":
            pipeline.cmd_eval_scanpaths(cfg, args.generated, args.out, args.split)
            print(f"scanpath report at {args.out}")
        elif args.command == "eval-classifier":
            pipeline.cmd_eval_classifier(
                cfg, args.with_scores, args.without_scores, args.out, args.split
            )
            print(f"classification report at {args.out}")
        elif args.command == "gradcheck":
            ok, lines = pipeline.cmd_gradcheck(args.seeds, args.tol)
            for line in lines:
                print(line)
            return 0 if ok else 1
        elif args.command == "run-all":
            pipeline.run_all(cfg, args.out)
            print(f"pipeline artifacts under {args.out}")
    except (ContractViolation, FormatError, NumericFault, UndefinedMetricError, PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
