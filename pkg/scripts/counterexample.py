"""Exact values and a DAgger run on the ski counterexample for several horizons."""

import argparse

from agnostic_il.analysis import counterexample_suite


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--horizons", default="3,5,10,20")
    parser.add_argument("--rounds", type=int, default=200)
    parser.add_argument("--K", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print("H\tJ_h1\tJ_h2\tmu\th2_frac\tReg/N\texcess\tpassed")
    for H in map(int, args.horizons.split(",")):
        r = counterexample_suite(H, args.rounds, args.K, args.seed)
        print(f"{H}\t{r.J_h1:.4f}\t{r.J_h2:.4f}\t{r.mu:.4f}\t{r.h2_fraction:.3f}\t"
              f"{r.regret_per_round:.5f}\t{r.excess_cost:.3f}\t{r.passed}")
        for name, ok in r.checks.items():
            if not ok:
                print(f"  failed: {name}")


if __name__ == "__main__":
    main()
