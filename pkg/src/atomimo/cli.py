"""Command-line front end for the experiment harness.

Subcommands: ``run`` executes a config-driven experiment and emits
machine-readable results (plus per-trial convergence traces when the
experiment produces them), ``validate`` checks a config without running
it, ``list-experiments`` prints the known experiment ids, and
``report`` renders figures from a result file.

Exit codes: 0 success, 2 config validation failure, 3 numeric failure,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .experiments import (EXPERIMENTS, ConfigValidationError, ExperimentConfig,
                          config_from_dict, run_experiment, validate_config)
from .numerics import NumericFailure
from .results import emit_results, emit_trace_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="atomimo",
        description="Seeded Monte-Carlo experiments for IQ-aware precoding over "
                    "magnitude-detection MIMO links")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a JSON config")
    run_p.add_argument("--config", required=True, help="path to the JSON config")
    run_p.add_argument("--out", help="output path (overrides the config)")
    run_p.add_argument("--format", choices=("csv", "json"), help="output format")
    run_p.add_argument("--seed", type=int, help="base seed (overrides the config)")
    run_p.add_argument("--jobs", type=int, default=1, help="worker processes")
    run_p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="set a config field by dotted path, e.g. dims.nt=4")

    val_p = sub.add_parser("validate", help="validate a config without running it")
    val_p.add_argument("--config", required=True)

    sub.add_parser("list-experiments", help="print the known experiment ids")

    rep_p = sub.add_parser("report", help="render figures from a result file")
    rep_p.add_argument("--results", required=True, help="CSV or JSON result file")
    rep_p.add_argument("--out-dir", default=".", help="directory for the figures")
    rep_p.add_argument("--traces", help="directory holding convergence trace CSVs")
    return parser


def _apply_override(doc: dict, spec: str) -> None:
    if "=" not in spec:
        raise ConfigValidationError(f"override {spec!r}: expected KEY=VALUE")
    key, raw = spec.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = doc
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigValidationError(f"override {key!r}: {part} is not an object")
    node[parts[-1]] = value


def _load_config(args) -> ExperimentConfig:
    with open(args.config, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigValidationError(f"config is not valid JSON: {exc}") from exc
    for spec in getattr(args, "override", []):
        _apply_override(doc, spec)
    if getattr(args, "seed", None) is not None:
        doc["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        doc["out"] = args.out
    if getattr(args, "format", None) is not None:
        doc["format"] = args.format
    return config_from_dict(doc)


def _trace_path(out: str, sweep_value: float, trial: int) -> str:
    stem, _ = os.path.splitext(out)
    return f"{stem}_trace_nrf{int(sweep_value)}_t{trial}.csv"


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    result = run_experiment(cfg, jobs=args.jobs)
    out = cfg.out or "results." + cfg.format
    emit_results(result.records, cfg.format, out)
    for (sweep_value, trial), objectives in sorted(result.traces.items()):
        emit_trace_csv(objectives, _trace_path(out, sweep_value, trial))
    print(f"wrote {len(result.records)} records to {out}")
    print(f"{'sweep':>12} {'metric':>24} {'mean':>14} {'stderr':>12} {'n':>6}")
    for row in result.aggregates:
        print(f"{row.sweep_value:>12.4g} {row.metric:>24} "
              f"{row.mean:>14.6g} {row.stderr:>12.3g} {row.count:>6}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = _load_config(args)
    validate_config(cfg)
    print(f"config ok: {cfg.experiment}, {cfg.trials} trials, "
          f"{len(cfg.sweep.grid)} sweep points")
    return EXIT_OK


def _cmd_list() -> int:
    for name in EXPERIMENTS:
        print(name)
    return EXIT_OK


def _cmd_report(args) -> int:
    from .report import render_report
    paths = render_report(args.results, args.out_dir, traces_dir=args.traces)
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "list-experiments":
            return _cmd_list()
        if args.command == "report":
            return _cmd_report(args)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
