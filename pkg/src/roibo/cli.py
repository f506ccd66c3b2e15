"""Command-line front end: run seeded trial matrices, emit CSVs, render figures.

Exit codes: 0 success, 1 config/usage error, 2 runtime error (all trials
failed), 3 partial trial failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor

from .bench import TRACE_COLUMNS, aggregate, run_trial
from .configfile import ConfigError, parse_config

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_PARTIAL = 3

_METHOD_HELP = (
    ("ici", "intersect", "width of the intersected global/ROI interval"),
    ("rci", "roi", "ROI-model interval width (uncertainty sampling)"),
    ("rts", "roi", "Thompson sampling from the ROI model"),
    ("ucb", "global|roi|intersect", "upper confidence bound"),
    ("ts", "global|roi", "Thompson sampling"),
    ("ei", "global|roi", "expected improvement"),
    ("ciwidth", "global|roi|intersect", "confidence-interval width"),
)


def _fmt(value):
    if isinstance(value, float):
        return repr(float(value))  # shortest round-trip decimal
    return str(value)


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_", suffix=".csv")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trace_csv_text(config, trace):
    lines = [",".join(TRACE_COLUMNS)]
    for rec in trace.records:
        lines.append(",".join(_fmt(v) for v in trace.row_values(rec)))
    return "\n".join(lines) + "\n"


def summary_csv_text(rows):
    cols = ["t", "n"] + [k for k in rows[0] if k not in ("t", "n")]
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in cols))
    return "\n".join(lines) + "\n"


def _trace_path(out_dir, config, seed):
    return os.path.join(
        out_dir, f"{config.name}__{config.acquisition.label}__seed{seed}.trace.csv"
    )


def _summary_path(out_dir, config):
    return os.path.join(
        out_dir, f"{config.name}__{config.acquisition.label}.summary.csv"
    )


def list_methods(out=None):
    out = out or sys.stdout
    for family, scopes, desc in _METHOD_HELP:
        print(f"{family:8s} scope={scopes:24s} {desc}", file=out)


def run_command(args) -> int:
    if args.list_methods:
        list_methods()
        return EXIT_OK
    if not args.config:
        print("error: config path required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        configs = parse_config(args.config)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.seed_offset:
        configs = [
            dataclasses.replace(c, seeds=tuple(s + args.seed_offset for s in c.seeds))
            for c in configs
        ]

    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    targets = []
    for config in configs:
        targets.append(_summary_path(out_dir, config))
        targets.extend(_trace_path(out_dir, config, s) for s in config.seeds)
    if not args.overwrite:
        existing = [p for p in targets if os.path.exists(p)]
        if existing:
            print(
                f"error: output exists (use --overwrite): {existing[0]}",
                file=sys.stderr,
            )
            return EXIT_CONFIG

    jobs = [(config, seed) for config in configs for seed in config.seeds]
    results = {}
    failures = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [(config, seed, pool.submit(run_trial, config, seed))
                       for config, seed in jobs]
            pending = [(c, s, f.result) for c, s, f in futures]
    else:
        pending = [(c, s, (lambda c=c, s=s: run_trial(c, s))) for c, s in jobs]
    for config, seed, get in pending:
        try:
            results[(id(config), seed)] = get()
        except Exception as exc:
            failures.append((config, seed, str(exc)))
            print(
                f"error: trial config={config.name} method="
                f"{config.acquisition.label} seed={seed}: {exc}",
                file=sys.stderr,
            )

    n_ok = 0
    for config in configs:
        traces = []
        for seed in config.seeds:
            trace = results.get((id(config), seed))
            if trace is None:
                continue
            _atomic_write(_trace_path(out_dir, config, seed), trace_csv_text(config, trace))
            traces.append(trace)
            n_ok += 1
        if traces:
            rows = aggregate(traces)
            _atomic_write(_summary_path(out_dir, config), summary_csv_text(rows))
    if failures and n_ok == 0:
        return EXIT_RUNTIME
    if failures:
        return EXIT_PARTIAL
    return EXIT_OK


def report_command(args) -> int:
    from .plots import render_report

    if not os.path.isdir(args.dir):
        print(f"error: not a directory: {args.dir}", file=sys.stderr)
        return EXIT_CONFIG
    written = render_report(args.dir, args.out)
    if not written:
        print("error: no summary CSVs found", file=sys.stderr)
        return EXIT_CONFIG
    for path in written:
        print(path)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="roibo",
        description="Candidate-pool Bayesian optimization with ROI filtering",
    )
    sub = parser.add_subparsers(dest="command")

    run_p = sub.add_parser("run", help="run the experiments in a config file")
    run_p.add_argument("config", nargs="?", help="experiment config file")
    run_p.add_argument("--out", default="results", help="output directory")
    run_p.add_argument("--jobs", type=int, default=1, help="parallel trials")
    run_p.add_argument("--overwrite", action="store_true",
                       help="replace existing output files")
    run_p.add_argument("--list-methods", action="store_true",
                       help="print the acquisition methods and exit")
    run_p.add_argument("--seed-offset", type=int, default=0,
                       help="add K to every configured seed")
    run_p.set_defaults(func=run_command)

    rep_p = sub.add_parser("report", help="render figures from summary CSVs")
    rep_p.add_argument("dir", help="directory containing *.summary.csv files")
    rep_p.add_argument("--out", default=None, help="figure output directory")
    rep_p.set_defaults(func=report_command)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_help()
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
