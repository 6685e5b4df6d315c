"""Self-checks runnable from the command line.

Each suite returns a list of ``Check`` records; the CLI exits nonzero if any
fails.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from agnostic_il import seeding
from agnostic_il.algorithms import AlgoConfig, TabularProblem, run
from agnostic_il.analysis import counterexample_suite, history_ledger, loglog_slope
from agnostic_il.harness.build import fork_policy_class
from agnostic_il.harness.evaluation import bootstrap_ci
from agnostic_il.mdp import fork_expert_table, fork_mdp, performance_difference, random_mdp
from agnostic_il.oracles import Dataset, bootstrap_resample, class_losses, erm_01, ols_fit
from agnostic_il.perturbation import CoveringDistribution, bias_bound_check, smoothness_estimate, theory_lambda
from agnostic_il.policies import DeterministicPolicy, ExpertPolicy, FinitePolicyClass, StochasticPolicy

SLOPE_NS = (32, 64, 128, 256, 512)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def pdl_suite(n_mdps: int = 100, seed: int = 0) -> list[Check]:
    rng = seeding.derive_rng(seed, "pdl")
    worst = 0.0
    for _ in range(n_mdps):
        H, W, A = int(rng.integers(1, 7)), int(rng.integers(1, 11)), int(rng.integers(1, 5))
        mdp = random_mdp(H, W, A, rng)
        pi = StochasticPolicy.random(mdp.n_states, A, rng)
        ref = StochasticPolicy.random(mdp.n_states, A, rng)
        lhs, rhs = performance_difference(mdp, pi, ref)
        worst = max(worst, abs(lhs - rhs))
    return [Check("performance difference", worst <= 1e-9, f"max |lhs - rhs| = {worst:.3g} over {n_mdps} MDPs")]


def counterexample_checks(horizon: int = 10, rounds: int = 200, K: int = 10) -> list[Check]:
    report = counterexample_suite(horizon, rounds, K)
    detail = (
        f"J_h1={report.J_h1:.6g} J_h2={report.J_h2:.6g} mu={report.mu:.6g} "
        f"h2_fraction={report.h2_fraction:.3f} Reg/N={report.regret_per_round:.4g} excess={report.excess_cost:.4g}"
    )
    return [Check(f"counterexample: {name}", ok, detail) for name, ok in report.checks.items()]


def bias_suite(trials: int = 2000, seed: int = 0) -> list[Check]:
    out = []
    for B, A, lam, K in ((16, 2, 64, 1), (64, 3, 32, 2)):
        rng = seeding.derive_rng(seed, "bias", B, A)
        S = 20
        cls = FinitePolicyClass.random_tables(B, S, A, rng)
        res = bias_bound_check(CoveringDistribution.uniform(S), cls, lam, K, trials, rng)
        ok = res.mean <= res.bound + 3 * res.stderr
        out.append(Check(f"bias bound (B={B},A={A},lam={lam},K={K})", ok,
                         f"mean={res.mean:.4f} se={res.stderr:.4f} bound={res.bound:.4f}"))
    return out


def oracle_suite(n_datasets: int = 1000, seed: int = 0) -> list[Check]:
    rng = seeding.derive_rng(seed, "oracle")
    bad = 0
    for _ in range(n_datasets):
        S, A, B = int(rng.integers(1, 8)), int(rng.integers(2, 4)), int(rng.integers(1, 12))
        cls = FinitePolicyClass.random_tables(B, S, A, rng)
        n = int(rng.integers(0, 30))
        D = Dataset(rng.integers(0, S, n), rng.integers(0, A, n))
        idx, loss = erm_01(D, cls)
        rescan = [sum(int(cls.tables[h, s] != a) for s, a in zip(D.states, D.actions)) for h in range(B)]
        if loss != rescan[idx] or loss != min(rescan) or idx != rescan.index(min(rescan)):
            bad += 1
    out = [Check("erm exactness", bad == 0, f"{bad} mismatches over {n_datasets} datasets")]

    worst_orth, worst_interp = 0.0, 0.0
    for _ in range(50):
        n, ds, da = int(rng.integers(1, 40)), int(rng.integers(1, 6)), int(rng.integers(1, 4))
        X, Y = rng.standard_normal((n, ds)), rng.standard_normal((n, da))
        W = ols_fit(Dataset(X, Y), ds, da).weights
        resid = Y - X @ W.T
        worst_orth = max(worst_orth, float(np.abs(X.T @ resid).max() / max(1.0, np.abs(X).max() * np.abs(Y).max())))
        W_true = rng.standard_normal((da, ds))
        W_fit = ols_fit(Dataset(X, X @ W_true.T), ds, da).weights
        worst_interp = max(worst_interp, float(np.abs(X @ W_fit.T - X @ W_true.T).max()))
    out.append(Check("ols residual orthogonality", worst_orth <= 1e-8, f"max scaled |X^T r| = {worst_orth:.3g}"))
    out.append(Check("ols interpolation", worst_interp <= 1e-8, f"max |X W_fit - Y| = {worst_interp:.3g}"))
    return out


def bootstrap_suite(n: int = 1000, resamples: int = 10_000, seed: int = 0) -> list[Check]:
    rng = seeding.derive_rng(seed, "bootstrap")
    D = Dataset(np.arange(n), np.zeros(n, dtype=np.int64))
    fraction = np.mean([len(np.unique(bootstrap_resample(D, rng).states)) / n for _ in range(resamples)])
    target = 1 - (1 - 1 / n) ** n
    out = [Check("bootstrap inclusion", abs(fraction - 0.6323) <= 0.01,
                 f"mean inclusion {fraction:.4f}, analytic {target:.4f}")]
    const = bootstrap_ci(np.full(7, 2.5), (0.1, 0.9), 1000, rng)
    out.append(Check("bootstrap ci on constants", bool(np.all(const == 2.5)), f"quantiles {const.tolist()}"))
    return out


def fork_problem(horizon: int = 6, slip: float = 0.1, size: int = 8, seed: int = 0) -> TabularProblem:
    """The designed nonrealizable task with an exact-mixture covering distribution."""
    mdp = fork_mdp(horizon, slip)
    cls = fork_policy_class(horizon, size, seeding.derive_rng(seed, seeding.SETUP, "class"))
    expert = ExpertPolicy(DeterministicPolicy(fork_expert_table(horizon), 2, "expert"))
    return TabularProblem(mdp, cls, expert, CoveringDistribution.exact_mixture(mdp, cls))


def fork_theory_lambda(problem: TabularProblem, K: int, rounds: int, seed: int = 0) -> tuple[float, float]:
    """(lambda, empirical 1/sigma) for the fork task."""
    rng = seeding.derive_rng(seed, seeding.SETUP, "smoothness")
    inv_sigma = smoothness_estimate(problem.mdp, problem.policy_class, problem.d0, 200, rng).inv_sigma
    return theory_lambda(problem.mdp.n_actions, K, 1.0 / inv_sigma, rounds), inv_sigma


def regret_slopes(problem: TabularProblem, config: AlgoConfig, seeds) -> list[float]:
    slopes = []
    for s in seeds:
        cfg = AlgoConfig(**{**config.__dict__, "seed": s, "rounds": max(SLOPE_NS)})
        ledger = history_ledger(problem, run(problem, cfg))
        slopes.append(loglog_slope(SLOPE_NS, [ledger.regret(n) for n in SLOPE_NS]))
    return slopes


def regret_slope_suite(seeds=range(5), K: int = 10, E: int = 25) -> list[Check]:
    problem = fork_problem()
    lam, inv_sigma = fork_theory_lambda(problem, K, max(SLOPE_NS))
    slopes = regret_slopes(problem, AlgoConfig("mftpl-p", max(SLOPE_NS), K, E, lam=lam), seeds)
    med = float(np.median(slopes))
    return [Check(f"regret slope MP-{E}", med <= 0.8,
                  f"median slope {med:.3f} (per seed {np.round(slopes, 3).tolist()}), "
                  f"lam={lam:.1f}, 1/sigma={inv_sigma:.3f}")]


SUITES = {
    "pdl": pdl_suite,
    "counterexample": counterexample_checks,
    "bias": bias_suite,
    "oracle": oracle_suite,
    "bootstrap": bootstrap_suite,
    "regret-slope": regret_slope_suite,
}
