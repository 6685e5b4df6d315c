"""Regret growth of DAgger and MFTPL-P on the fork task across perturbation budgets.

Writes one CSV row per (learner, seed, N) with the cumulative regret, and
prints the median log-log slope per learner.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from agnostic_il.algorithms import AlgoConfig, run
from agnostic_il.analysis import history_ledger, loglog_slope
from agnostic_il.harness.verify import SLOPE_NS, fork_problem, fork_theory_lambda


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--K", type=int, default=10)
    parser.add_argument("--E", type=int, default=25)
    parser.add_argument("--lams", default="100,400,1600", help="extra budgets besides the theory value")
    parser.add_argument("--out", default="regret_scaling.csv")
    args = parser.parse_args()

    problem = fork_problem()
    N = max(SLOPE_NS)
    theory, inv_sigma = fork_theory_lambda(problem, args.K, N)
    print(f"empirical 1/sigma = {inv_sigma:.3f}, theory lambda = {theory:.1f}")
    learners = {"DAgger": AlgoConfig("dagger", N, args.K)}
    for lam in [float(x) for x in args.lams.split(",")] + [theory]:
        learners[f"MP-{args.E}(poi{lam:.0f})"] = AlgoConfig("mftpl-p", N, args.K, args.E, lam=lam)

    with Path(args.out).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["learner", "seed", "N", "regret"])
        for name, cfg in learners.items():
            slopes = []
            for seed in range(args.seeds):
                ledger = history_ledger(problem, run(problem, AlgoConfig(**{**cfg.__dict__, "seed": seed})))
                regs = [ledger.regret(n) for n in SLOPE_NS]
                writer.writerows([name, seed, n, repr(r)] for n, r in zip(SLOPE_NS, regs))
                slopes.append(loglog_slope(SLOPE_NS, regs))
            print(f"{name:>18}: median slope {np.median(slopes):.3f}  (seeds {np.round(slopes, 2).tolist()})")


if __name__ == "__main__":
    main()
