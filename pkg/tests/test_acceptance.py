"""One test per acceptance criterion; each records a PASS/FAIL line for the terminal summary."""

import time

import numpy as np
import pytest
import yaml
from conftest import ACCEPTANCE_LINES

from agnostic_il import seeding
from agnostic_il.algorithms import AlgoConfig, TabularProblem, run, run_dagger, run_mftpl_p
from agnostic_il.analysis import (
    counterexample,
    counterexample_suite,
    estgap,
    exact_Fn,
    history_ledger,
    loglog_slope,
    mu_estimate,
    reduction_bound_check,
)
from agnostic_il.harness import cli
from agnostic_il.harness.verify import SLOPE_NS, fork_problem, fork_theory_lambda
from agnostic_il.mdp import expected_cost, optimal_policy, performance_difference, random_mdp
from agnostic_il.oracles import Dataset, bootstrap_resample, erm_01, ols_fit
from agnostic_il.perturbation import CoveringDistribution, bias_bound_check, draw_perturbation
from agnostic_il.policies import DeterministicPolicy, ExpertPolicy, FinitePolicyClass, StochasticPolicy


def report(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


def test_01_performance_difference():
    rng = seeding.derive_rng(2024, "acceptance-pdl")
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        H, W, A = int(rng.integers(1, 7)), int(rng.integers(1, 11)), int(rng.integers(1, 5))
        mdp = random_mdp(H, W, A, rng)
        pi = StochasticPolicy.random(mdp.n_states, A, rng)
        ref = StochasticPolicy.random(mdp.n_states, A, rng)
        lhs, rhs = performance_difference(mdp, pi, ref)
        worst = max(worst, abs(lhs - rhs))
    elapsed = time.perf_counter() - start
    report(1, "performance-difference identity", worst <= 1e-9 and elapsed < 10,
           f"max |lhs-rhs|={worst:.2e}, {elapsed:.2f}s")


def test_02_counterexample_arithmetic():
    worst = 0.0
    for H in (3, 4, 10, 25):
        ce = counterexample(H)
        h1, h2 = ce.policy_class[0], ce.policy_class[1]
        worst = max(worst, abs(expected_cost(ce.mdp, ce.expert)), abs(expected_cost(ce.mdp, h1) - 1),
                    abs(expected_cost(ce.mdp, h2) - (H - 1)))
        rng = np.random.default_rng(H)
        rollers = [h1, h2, ce.expert] + [StochasticPolicy.random(ce.mdp.n_states, 2, rng) for _ in range(20)]
        for roller in rollers:
            gap = exact_Fn(ce.mdp, roller, h1, ce.expert) - exact_Fn(ce.mdp, roller, h2, ce.expert)
            worst = max(worst, abs(gap - 1 / H))
    report(2, "counterexample exact values", worst <= 1e-12, f"max deviation {worst:.2e} over H in 3,4,10,25")


def test_03_counterexample_dynamics():
    start = time.perf_counter()
    rep = counterexample_suite(10, rounds=200, K=10)
    elapsed = time.perf_counter() - start
    H = 10
    ok = rep.h2_fraction >= 0.9 and rep.excess_cost >= 0.8 * (H - 2) and elapsed < 30
    report(3, "DAgger on the counterexample", ok,
           f"h2 fraction={rep.h2_fraction:.3f}, mean J(pi_n)-J(h1)={rep.excess_cost:.3f} "
           f">= {0.8 * (H - 2):.1f}, Reg/N={rep.regret_per_round:.4f}, {elapsed:.1f}s")


def _battery_problem(i):
    rng = seeding.derive_rng(i, "battery")
    H, W, A = int(rng.integers(2, 6)), int(rng.integers(2, 5)), int(rng.integers(2, 4))
    mdp = random_mdp(H, W, A, rng)
    if i % 2:
        expert_table = optimal_policy(mdp)
    else:
        expert_table = rng.integers(0, A, mdp.n_states)
    cls = FinitePolicyClass.corruptions(expert_table, A, int(rng.integers(4, 16)), int(rng.integers(1, 3)), rng)
    expert = ExpertPolicy(DeterministicPolicy(expert_table, A))
    return TabularProblem(mdp, cls, expert, CoveringDistribution.uniform(mdp.n_states))


def test_04_reduction_bound():
    start = time.perf_counter()
    configs = [
        AlgoConfig("bc", 20, 5),
        AlgoConfig("dagger", 20, 5),
        AlgoConfig("mftpl-p", 20, 5, 8, lam=10.0),
        AlgoConfig("bootstrap-dagger", 20, 5, 5),
    ]
    failures, tightest = [], -np.inf
    for i in range(20):
        problem = _battery_problem(i)
        mu = mu_estimate(problem.mdp, problem.expert).mu
        for cfg in configs:
            hist = run(problem, AlgoConfig(**{**cfg.__dict__, "seed": i}))
            check = reduction_bound_check(problem.mdp, hist.policies, problem.expert, problem.policy_class, mu=mu)
            tightest = max(tightest, check.lhs - check.rhs)
            if not check.holds:
                failures.append((i, cfg.label))
    elapsed = time.perf_counter() - start
    report(4, "reduction bound on 20 runs x 4 algorithms", not failures and elapsed < 120,
           f"{len(failures)} violations, max lhs-rhs={tightest:.3g}, {elapsed:.1f}s")


def test_05_regret_scaling():
    start = time.perf_counter()
    problem = fork_problem()
    K, N = 10, max(SLOPE_NS)
    lam, inv_sigma = fork_theory_lambda(problem, K, N)
    slopes = []
    for seed in range(5):
        hist = run_mftpl_p(problem, AlgoConfig("mftpl-p", N, K, 25, lam=lam, seed=seed))
        ledger = history_ledger(problem, hist)
        slopes.append(loglog_slope(SLOPE_NS, [ledger.regret(n) for n in SLOPE_NS]))
    med = float(np.median(slopes))
    elapsed = time.perf_counter() - start
    report(5, "MFTPL-P regret slope", med <= 0.8 and elapsed < 300,
           f"median slope {med:.3f}, per seed {np.round(slopes, 3).tolist()}, "
           f"lambda={lam:.0f}, 1/sigma={inv_sigma:.2f}, {elapsed:.1f}s")


@pytest.mark.parametrize("B,A,lam,K", [(16, 2, 64, 1), (64, 3, 32, 2)])
def test_06_perturbation_bias(B, A, lam, K):
    start = time.perf_counter()
    rng = seeding.derive_rng(B, A, "bias")
    S = 20
    cls = FinitePolicyClass.random_tables(B, S, A, rng)
    res = bias_bound_check(CoveringDistribution.uniform(S), cls, lam, K, 2000, rng)
    elapsed = time.perf_counter() - start
    report(6, f"perturbation bias bound (B={B},A={A},lambda={lam},K={K})",
           res.mean <= res.bound + 3 * res.stderr and elapsed < 30,
           f"mean={res.mean:.3f} se={res.stderr:.3f} bound={res.bound:.3f}, {elapsed:.1f}s")


def test_07_perturbation_unbiasedness():
    worst = 0.0
    for i in range(10):
        rng = seeding.derive_rng(i, "unbiased")
        S, A = 12, 2 + i % 3
        d0 = CoveringDistribution("exact-mixture", pmf=rng.dirichlet(np.ones(S)))
        h = rng.integers(0, A, S)
        Q = draw_perturbation(d0, A, rng, fixed=100_000)
        worst = max(worst, abs(np.mean(h[Q.states] != Q.actions) - (A - 1) / A))
    report(7, "perturbation disagreement rate (A-1)/A", worst <= 0.01, f"max deviation {worst:.4f} over 10 h")


def test_08_oracle_exactness():
    rng = seeding.derive_rng(8, "oracle")
    bad = 0
    for _ in range(1000):
        S, A, B = int(rng.integers(1, 10)), int(rng.integers(2, 5)), int(rng.integers(1, 20))
        cls = FinitePolicyClass.random_tables(B, S, A, rng)
        n = int(rng.integers(0, 50))
        D = Dataset(rng.integers(0, S, n), rng.integers(0, A, n))
        idx, loss = erm_01(D, cls)
        rescan = [int(np.sum(cls.tables[h, D.states] != D.actions)) for h in range(B)]
        bad += not (loss == rescan[idx] and all(loss <= r for r in rescan))
    worst_orth = worst_interp = 0.0
    for _ in range(200):
        n, ds, da = int(rng.integers(1, 50)), int(rng.integers(1, 8)), int(rng.integers(1, 4))
        X = rng.standard_normal((n, ds)) * 10 ** rng.uniform(-2, 2)
        Y = rng.standard_normal((n, da))
        W = ols_fit(Dataset(X, Y), ds, da).weights
        scale = max(1.0, np.abs(X).max() * np.abs(Y).max())
        worst_orth = max(worst_orth, np.abs(X.T @ (Y - X @ W.T)).max() / scale)
        Yc = X @ rng.standard_normal((da, ds)).T
        Wc = ols_fit(Dataset(X, Yc), ds, da).weights
        worst_interp = max(worst_interp, np.abs(X @ Wc.T - Yc).max() / max(1.0, np.abs(Yc).max()))
    report(8, "oracle exactness", bad == 0 and worst_orth <= 1e-8 and worst_interp <= 1e-8,
           f"{bad} ERM mismatches / 1000, OLS orthogonality {worst_orth:.1e}, interpolation {worst_interp:.1e}")


def test_09_bootstrap_inclusion():
    n = 1000
    rng = seeding.derive_rng(9, "bootstrap")
    D = Dataset(np.arange(n), np.zeros(n, dtype=np.int64))
    frac = float(np.mean([len(np.unique(bootstrap_resample(D, rng).states)) / n for _ in range(10_000)]))
    report(9, "bootstrap inclusion probability", abs(frac - 0.6323) <= 0.01,
           f"{frac:.4f} vs analytic {1 - (1 - 1 / n) ** n:.4f}")


def test_10_degenerate_coincidence():
    problem = _battery_problem(3)
    same = True
    for seed in range(3):
        dagger = run_dagger(problem, AlgoConfig("dagger", 50, 5, seed=seed))
        mp = run_mftpl_p(problem, AlgoConfig("mftpl-p", 50, 5, 1, lam=0.0, seed=seed))
        same &= [r.members for r in dagger.rounds] == [r.members for r in mp.rounds]
        same &= dagger.final_members == mp.final_members
        same &= all(a == b for a, b in zip(dagger.datasets, mp.datasets))
    report(10, "MFTPL-P(lambda=0, E=1) equals DAgger", same, "50 rounds x 3 seeds, members and datasets")


def test_11_directional_ensembles():
    problem = fork_problem()
    H, K, N = problem.horizon, 10, 256
    mu = mu_estimate(problem.mdp, problem.expert).mu
    configs = {
        "DAgger": AlgoConfig("dagger", N, K),
        "MP-25": AlgoConfig("mftpl-p", N, K, 25, lam=100.0),
        "BD-1": AlgoConfig("bootstrap-dagger", N, K, 1),
        "BD-5": AlgoConfig("bootstrap-dagger", N, K, 5),
    }
    med = {}
    for name, cfg in configs.items():
        gaps = [estgap(history_ledger(problem, run(problem, AlgoConfig(**{**cfg.__dict__, "seed": s}))), mu, H)
                for s in range(1, 11)]
        med[name] = float(np.median(gaps))
    ok = med["MP-25"] <= med["DAgger"] and med["BD-5"] <= med["BD-1"]
    report(11, "ensembles reduce final EstGap", ok, ", ".join(f"{k}={v:.3f}" for k, v in med.items()))


def test_12_sweep_determinism(tmp_path):
    doc = {
        "env": {"kind": "fork", "horizon": 5, "slip": 0.1},
        "policy_class": {"kind": "designed", "size": 6},
        "d0": {"kind": "exact-mixture"},
        "algorithms": [
            {"algorithm": "dagger", "rounds": 20, "samples_per_round": 5},
            {"algorithm": "mftpl-p", "rounds": 20, "samples_per_round": 5, "ensemble_size": 5, "lam": 20.0},
            {"algorithm": "bootstrap-dagger", "rounds": 20, "samples_per_round": 5, "ensemble_size": 3},
        ],
    }
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(doc))
    codes = [cli.main(["sweep", "--config", str(path), "--seeds", "1..4", "--out", str(tmp_path / d)]) for d in "ab"]
    a, b = ((tmp_path / d / "results.csv").read_bytes() for d in "ab")
    rows = len(a.splitlines()) - 1
    report(12, "repeated sweep is byte-identical", codes == [0, 0] and a == b and rows == 3 * 4 * 20,
           f"{len(a)} bytes, {rows} rows")
