"""Run a sweep from a config and print final-round cost and EstGap per algorithm."""

import argparse
from collections import defaultdict

import numpy as np

from agnostic_il.harness.config import load_config, parse_seed_range
from agnostic_il.harness.sweep import run_sweep


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default="configs/fork_comparison.yaml")
    parser.add_argument("--seeds", default=None, help="override, e.g. 1..10")
    parser.add_argument("--out", default=None, help="also write the sweep outputs here")
    args = parser.parse_args()

    config = load_config(args.config)
    seeds = parse_seed_range(args.seeds) if args.seeds else None
    result = run_sweep(config, seeds, args.out)
    final = defaultdict(list)
    for r in result.runs:
        if r.rows:
            final[r.algo].append(r.rows[-1])
    print(f"{'algo':>16}  {'cost':>7}  {'estgap':>7}  seeds")
    for algo, rows in final.items():
        cost = np.median([row["eval_mean"] for row in rows])
        gap = np.median([row["estgap"] for row in rows])
        print(f"{algo:>16}  {cost:7.3f}  {gap:7.3f}  {len(rows)}")
    for r in result.failures:
        print(f"failed: {r.algo} seed {r.seed}")


if __name__ == "__main__":
    main()
