"""Command-line entry point.

    tmobo run --config configs/protocol.toml [--jobs N] [--out DIR]
    tmobo hv --trace results/trace.csv --ref 400,400,400

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
``TMOBO_SEED`` overrides the configured root seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .driver import run_experiment, summarize
from .io import (TraceFormatError, evaluations_csv, read_evaluations, read_trace, summary_csv,
                 trace_csv, write_atomic)
from .pareto import extract_front, hypervolume
from .problems import make_problem

log = logging.getLogger("tmobo")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def cmd_run(config_path, jobs: int = 1, out=None) -> int:
    try:
        config = load_config(config_path)
        seed = os.environ.get("TMOBO_SEED")
        if seed is not None:
            try:
                config = dataclasses.replace(config, seed=int(seed))
            except ValueError:
                raise ConfigError("TMOBO_SEED", f"must be an integer, got {seed!r}") from None
        if out is not None:
            config = dataclasses.replace(config, output_dir=str(out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        problem = make_problem(config.problem, config.noise_sd)
        failures = []
        records = run_experiment(config, jobs=jobs, failures=failures)
        out_dir = Path(config.output_dir)
        write_atomic(out_dir / "trace.csv", trace_csv(records, problem.dim_out))
        write_atomic(out_dir / "summary.csv", summary_csv(summarize(records)))
        write_atomic(out_dir / "evaluations.csv", evaluations_csv(records, problem.dim_in, problem.dim_out))
        write_atomic(out_dir / "config.toml", config.dumps())
        if failures:
            write_atomic(out_dir / "failures.json", json.dumps(failures, indent=2) + "\n")
            print(f"warning: {len(failures)} replication(s) aborted; see failures.json", file=sys.stderr)
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        log.exception("run failed")
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {len(records)} trace rows to {out_dir}")
    return EXIT_OK


def _recompute_hv(records, evaluations, ref):
    by_key = {k: sorted(v) for k, v in evaluations.items()}
    for r in records:
        ys = by_key.get((r.family, r.replication))
        if ys is None:
            raise TraceFormatError(f"no evaluations for {r.family} replication {r.replication}")
        Y = np.array([y for k, y in ys if k <= r.eval_count], dtype=float)
        if len(Y) != r.eval_count:
            raise TraceFormatError(
                f"{r.family} replication {r.replication}: {len(Y)} evaluations for eval_count {r.eval_count}")
        r.hv_indicator = hypervolume(extract_front(Y), ref)
    return records


def cmd_hv(trace_path, ref_point, evaluations=None, out=None) -> int:
    """Summarize a trace; hypervolumes are recomputed when evaluations are available."""
    try:
        records = read_trace(trace_path)
        ref = np.array([float(v) for v in ref_point], dtype=float)
        evals_path = Path(evaluations) if evaluations else Path(trace_path).with_name("evaluations.csv")
        if evals_path.exists():
            _recompute_hv(records, read_evaluations(evals_path), ref)
        elif evaluations:
            raise TraceFormatError(f"evaluations file {evals_path} not found")
        else:
            log.warning("no evaluations.csv beside the trace; using stored hv_indicator values")
    except (TraceFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = summary_csv(summarize(records))
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _ref(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser():
    parser = _Parser(prog="tmobo", description="Student-t process multi-objective Bayesian optimization")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment from a TOML config")
    run.add_argument("--config", required=True)
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--out", default=None, help="override the configured output directory")

    hv = sub.add_parser("hv", help="summarize a trace (mean and 95%% CI per evaluation)")
    hv.add_argument("--trace", required=True)
    hv.add_argument("--ref", required=True, type=_ref, help="reference point, e.g. 400,400,400")
    hv.add_argument("--evaluations", default=None)
    hv.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        if args.jobs < 1:
            print("error: --jobs must be >= 1", file=sys.stderr)
            return EXIT_USAGE
        return cmd_run(args.config, args.jobs, args.out)
    return cmd_hv(args.trace, args.ref, args.evaluations, args.out)


if __name__ == "__main__":
    sys.exit(main())
