"""Command-line interface.

Subcommands: generate (traffic config -> dataset), train (experiment config
-> checkpoint), eval (checkpoint + dataset -> report), compare (reports ->
delta table), sweep (attention grid -> table).  Every subcommand accepts
--config, --seed, and --out; --out falls back to the SLICEROUTE_OUT_DIR
environment variable, then to the working directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from ..datagen import generate as generate_traffic
from ..errors import SliceRouteError
from .comparison import compare, write_comparison
from .config import read_experiment_config, read_traffic_config
from .evaluation import EvalReport, replication_accuracy
from .sweep import run_attention_sweep
from .training import train

OUT_DIR_ENV = "SLICEROUTE_OUT_DIR"


def _out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get(OUT_DIR_ENV)
    return Path(env) if env else Path(".")


def _cmd_generate(args) -> int:
    config = read_traffic_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    dataset_path, manifest = generate_traffic(config, _out_dir(args))
    print(f"dataset: {dataset_path}")
    print(f"samples: {manifest['sample_count']}")
    print(f"sha256:  {manifest['dataset_sha256']}")
    return 0


def _cmd_train(args) -> int:
    exp = read_experiment_config(args.config)
    out = _out_dir(args)
    report = train(exp, out, seed=args.seed)
    print(f"run:        {report['run_id']} ({report['model_kind']})")
    if report["epochs"]:
        last = report["epochs"][-1]
        print(f"final:      train {last['train_loss']:.6f}  val {last['val_loss']:.6f}")
        print(f"selected:   epoch {report['selected_epoch']}")
    print(f"checkpoint: {out / report['checkpoint']}")
    return 0


def _cmd_eval(args) -> int:
    checkpoint = args.checkpoint
    data = args.data
    slices = args.slices
    if args.config:
        exp = read_experiment_config(args.config)
        data = data or exp.test_data
        slices = slices or exp.slices
    if not (checkpoint and data and slices):
        raise SliceRouteError("eval needs --checkpoint plus --data/--slices (directly or via --config)")
    report = replication_accuracy(checkpoint, data, slices)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    path = report.write(out / args.name)
    print(f"report:  {path}")
    print(f"overall: {100 * report.overall_ra:.2f}% ({report.correct}/{report.total})")
    macro = report.macro_tail_ra()
    if macro is not None:
        print(f"macro tail: {100 * macro:.2f}%")
    return 0


def _cmd_compare(args) -> int:
    reports = [EvalReport.read(p) for p in args.reports]
    baseline = args.baseline
    if Path(baseline).exists():
        baseline = EvalReport.read(baseline).run_id
    table = compare(reports, baseline)
    paths = write_comparison(table, _out_dir(args))
    sys.stdout.write(table.render_text())
    print(f"written: {paths['txt']}, {paths['csv']}, {paths['json']}")
    return 0


def _cmd_sweep(args) -> int:
    exp = read_experiment_config(args.config)
    seed = args.seed if args.seed is not None else exp.seed
    result = run_attention_sweep(_out_dir(args), exp, seed=seed)
    sys.stdout.write(result.render_text())
    return 0


def _add_common(parser: argparse.ArgumentParser, config_required: bool, config_help: str) -> None:
    parser.add_argument("--config", required=config_required, help=config_help)
    parser.add_argument("--seed", type=int, default=None, help="override the configured seed")
    parser.add_argument("--out", default=None, help=f"output directory (default: ${OUT_DIR_ENV} or .)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sliceroute",
        description="slice-aware hypothesis-routing toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="generate a synthetic traffic dataset")
    _add_common(p_gen, config_required=True, config_help="traffic config (key=value)")
    p_gen.set_defaults(func=_cmd_generate)

    p_train = sub.add_parser("train", help="train one model from an experiment config")
    _add_common(p_train, config_required=True, config_help="experiment config (key=value)")
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    _add_common(p_eval, config_required=False, config_help="experiment config supplying data/slices")
    p_eval.add_argument("--checkpoint", required=True, help="model checkpoint (.npz)")
    p_eval.add_argument("--data", default=None, help="dataset file to evaluate on")
    p_eval.add_argument("--slices", default=None, help="slice list file")
    p_eval.add_argument("--name", default="eval_report.json", help="report file name")
    p_eval.set_defaults(func=_cmd_eval)

    p_cmp = sub.add_parser("compare", help="compare evaluation reports against a baseline")
    _add_common(p_cmp, config_required=False, config_help="accepted for interface uniformity (unused)")
    p_cmp.add_argument("--baseline", required=True, help="baseline run id or report path")
    p_cmp.add_argument("reports", nargs="+", help="evaluation report files")
    p_cmp.set_defaults(func=_cmd_compare)

    p_sweep = sub.add_parser("sweep", help="attention method x temperature grid")
    _add_common(p_sweep, config_required=True, config_help="slice-model experiment config template")
    p_sweep.set_defaults(func=_cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SliceRouteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
