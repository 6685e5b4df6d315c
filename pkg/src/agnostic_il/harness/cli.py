"""Command-line entry point: run, sweep, verify, report."""

from __future__ import annotations

import argparse
import sys
from collections import defaultdict

import numpy as np

from agnostic_il import seeding
from agnostic_il.harness.config import ConfigError, load_config, parse_seed_range
from agnostic_il.harness.evaluation import bootstrap_ci, quantile_key
from agnostic_il.harness.sweep import read_results, run_sweep
from agnostic_il.harness.verify import SUITES


def _sweep(args, seeds) -> int:
    try:
        config = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    result = run_sweep(config, seeds if seeds is not None else config.seeds, args.out)
    for r in result.failures:
        print(f"run failed: {r.algo} seed {r.seed}\n{r.error}", file=sys.stderr)
    ok = len(result.runs) - len(result.failures)
    print(f"{ok}/{len(result.runs)} runs completed; outputs in {args.out}")
    return 1 if result.failures else 0


def cmd_run(args) -> int:
    return _sweep(args, None)


def cmd_sweep(args) -> int:
    try:
        seeds = parse_seed_range(args.seeds)
    except ValueError as exc:
        print(f"bad --seeds: {exc}", file=sys.stderr)
        return 2
    return _sweep(args, seeds)


def cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    failed = 0
    for name in names:
        for check in SUITES[name]():
            print(check.line())
            failed += not check.passed
    return 1 if failed else 0


def cmd_report(args) -> int:
    quantiles = [float(q) for q in args.quantiles.split(",")]
    rows = read_results(args.input)
    final: dict[str, dict[int, float]] = defaultdict(dict)
    for row in rows:
        final[row["algo"]][row["seed"]] = row["eval_mean"]  # rows are round-ordered; keep the last
    header = ["algo", "n_seeds", "mean"] + [quantile_key(q) for q in quantiles]
    print("\t".join(header))
    for algo, per_seed in final.items():
        values = np.array(list(per_seed.values()))
        qs = bootstrap_ci(values, quantiles, args.resamples, seeding.derive_rng(0, seeding.AGGREGATE, algo))
        print("\t".join([algo, str(len(values)), f"{values.mean():.4f}"] + [f"{q:.4f}" for q in qs]))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agnostic-il", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run every algorithm over the config's seeds")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run every algorithm over a seed range")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", required=True, help="inclusive range a..b or comma list")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run a self-check suite")
    p.add_argument("--suite", required=True, choices=[*SUITES, "all"])
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="final-round means with bootstrap quantiles")
    p.add_argument("--in", dest="input", required=True, help="sweep output directory or results.csv")
    p.add_argument("--quantiles", default="0.1,0.9")
    p.add_argument("--resamples", type=int, default=1000)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
