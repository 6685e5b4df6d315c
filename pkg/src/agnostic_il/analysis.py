"""Exact regret accounting, recoverability and the reduction bound for tabular runs."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from agnostic_il.algorithms import AlgoConfig, RunHistory, TabularProblem, run_dagger
from agnostic_il.mdp import L, R, LayeredMdp, backward_dp, counterexample_mdp, expected_cost, forward_visitation, simulate
from agnostic_il.oracles import Dataset, empirical_loss, pointwise_loss
from agnostic_il.policies import DeterministicPolicy, ExpertPolicy, FinitePolicyClass

BOUND_TOL = 1e-9


def loss_matrix(mdp: LayeredMdp, expert, loss: str = "zero-one") -> np.ndarray:
    """(S, A) table of l(a, expert(s))."""
    table = np.asarray(expert.table)
    A = mdp.n_actions
    if loss == "zero-one":
        return (np.arange(A)[None, :] != table[:, None]).astype(float)
    if loss == "absolute":
        return np.abs(np.arange(A)[None, :] - table[:, None]).astype(float)
    raise ValueError(f"loss {loss!r} is not defined on discrete actions")


def exact_Fn(mdp: LayeredMdp, roller, evaluee, expert, loss: str = "zero-one") -> float:
    """E_{s ~ d_roller} E_{a ~ evaluee(.|s)} l(a, expert(s)), from exact visitation."""
    d = forward_visitation(mdp, roller).d
    probs = np.nan_to_num(evaluee.probs if hasattr(evaluee, "probs") else np.asarray(evaluee))
    return float(d @ (probs * loss_matrix(mdp, expert, loss)).sum(axis=1))


def mc_Fn(mdp: LayeredMdp, roller, evaluee, expert, n: int, rng: np.random.Generator, loss: str = "zero-one"):
    """Monte Carlo F estimate from n (state, action) draws; returns (mean, stderr)."""
    t = rng.integers(0, mdp.horizon, size=n)
    states, _, _ = simulate(mdp, roller, n, rng, steps=int(t.max()) + 1)
    s = states[np.arange(n), t]
    probs = np.nan_to_num(evaluee.probs)
    cdf = np.cumsum(probs[s], axis=1)
    a = np.minimum((rng.random(n)[:, None] >= cdf).sum(axis=1), mdp.n_actions - 1)
    vals = loss_matrix(mdp, expert, loss)[s, a]
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n))


def class_cost_vector(mdp: LayeredMdp, roller, policy_class: FinitePolicyClass, expert) -> np.ndarray:
    """g*[h] = E_{s ~ d_roller} I(h(s) != expert(s)) for every member."""
    d = forward_visitation(mdp, roller).d
    wrong = policy_class.tables != np.asarray(expert.table)[None, :]
    return wrong.astype(float) @ d


def empirical_cost_vector(dataset: Dataset, policy_class: FinitePolicyClass) -> np.ndarray:
    """g_n[h]: mean 0-1 loss of every member on D_n."""
    wrong = policy_class.tables[:, dataset.states] != dataset.actions[None, :]
    return wrong.mean(axis=1)


# ------------------------------------------------------------------- regret


@dataclass
class RegretLedger:
    played: np.ndarray  # F_n(pi_n), shape (N,)
    class_costs: np.ndarray  # g*_n, shape (N, B)
    J: np.ndarray = field(default_factory=lambda: np.zeros(0))  # J(pi_n)

    @property
    def n_rounds(self) -> int:
        return len(self.played)

    def regret(self, n: int | None = None) -> float:
        n = self.n_rounds if n is None else n
        return float(self.played[:n].sum() - self.class_costs[:n].sum(axis=0).min())

    def regret_curve(self) -> np.ndarray:
        return self.played.cumsum() - self.class_costs.cumsum(axis=0).min(axis=1)

    def comparator_mean(self, n: int | None = None) -> float:
        n = self.n_rounds if n is None else n
        return float(self.class_costs[:n].mean(axis=0).min())


def regret(ledger: RegretLedger, n: int | None = None) -> float:
    return ledger.regret(n)


def estgap(ledger: RegretLedger, mu: float, horizon: int, n: int | None = None) -> float:
    """mu H Reg(N) / N."""
    n = ledger.n_rounds if n is None else n
    return mu * horizon * ledger.regret(n) / n


def build_ledger(mdp: LayeredMdp, policies: Sequence[Any], policy_class: FinitePolicyClass, expert) -> RegretLedger:
    played, costs, J = [], [], []
    for pi in policies:
        g = class_cost_vector(mdp, pi, policy_class, expert)
        costs.append(g)
        played.append(exact_Fn(mdp, pi, pi, expert))
        J.append(expected_cost(mdp, pi))
    return RegretLedger(np.array(played), np.array(costs), np.array(J))


def history_ledger(problem: TabularProblem, history: RunHistory) -> RegretLedger:
    return build_ledger(problem.mdp, history.policies, problem.policy_class, problem.expert)


def empirical_regret_curve(history: RunHistory, fit, loss: str) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative regret against the oracle refit on D_{1:n}, from stored datasets.

    Returns ``(played, curve)`` where ``played[n-1]`` is the loss of pi_n on
    D_n. The hindsight comparator is ``fit(D_{1:n})``, which for OLS minimises
    squared error rather than ``loss``, so the curve is an estimate.
    """
    played = np.array([empirical_loss(D, pi, loss) for D, pi in zip(history.datasets, history.policies)])
    sizes = np.array([len(D) for D in history.datasets])
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    curve = np.empty(len(played))
    for n in range(1, len(played) + 1):
        union = history.aggregate(n)
        best = fit(union)
        per_example = pointwise_loss(loss, best.act(union.states), union.actions)
        comparator = (np.add.reduceat(per_example, starts[:n]) / sizes[:n]).sum()
        curve[n - 1] = played[:n].sum() - comparator
    return played, curve


# ----------------------------------------------------------- recoverability


@dataclass(frozen=True)
class RecoverabilityReport:
    mu: float
    witness: tuple[int, int] | None
    loss: str
    infinite: bool = False


def mu_estimate(mdp: LayeredMdp, expert, loss: str = "zero-one") -> RecoverabilityReport:
    """Smallest mu with Q_exp(s,a) - V_exp(s) <= mu l(a, expert(s)) everywhere."""
    values = backward_dp(mdp, expert)
    advantage = values.Q - values.V[:, None]
    ell = loss_matrix(mdp, expert, loss)
    off_expert = np.ones_like(ell, dtype=bool)
    off_expert[np.arange(mdp.n_states), np.asarray(expert.table)] = False
    if np.any(off_expert & (ell == 0) & (advantage > 1e-12)):
        s, a = map(int, np.argwhere(off_expert & (ell == 0) & (advantage > 1e-12))[0])
        return RecoverabilityReport(float("inf"), (s, a), loss, infinite=True)
    ratio = np.where(off_expert & (ell > 0), advantage / np.where(ell > 0, ell, 1.0), -np.inf)
    if not np.isfinite(ratio).any():
        return RecoverabilityReport(0.0, None, loss)
    s, a = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    mu = max(0.0, float(ratio[s, a]))
    return RecoverabilityReport(mu, (int(s), int(a)) if mu > 0 else None, loss)


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool


def reduction_bound_check(
    mdp: LayeredMdp,
    policies: Sequence[Any],
    expert,
    policy_class: FinitePolicyClass,
    loss: str = "zero-one",
    mu: float | None = None,
) -> BoundCheck:
    """Both sides of J(pi_hat) - J(exp) <= mu H (min_h mean F_n(h) + Reg(N)/N).

    pi_hat is the uniform mixture over rounds, so J(pi_hat) is the mean of J(pi_n).
    """
    if loss != "zero-one":
        raise ValueError("the tabular ledger uses the zero-one loss")
    mu = mu_estimate(mdp, expert, loss).mu if mu is None else mu
    ledger = build_ledger(mdp, policies, policy_class, expert)
    N = ledger.n_rounds
    lhs = float(ledger.J.mean() - expected_cost(mdp, expert))
    rhs = mu * mdp.horizon * (ledger.comparator_mean() + ledger.regret() / N)
    return BoundCheck(lhs, rhs, lhs <= rhs + BOUND_TOL * max(1.0, abs(rhs)))


# ----------------------------------------------------------- counterexample


@dataclass(frozen=True)
class Counterexample:
    mdp: LayeredMdp
    policy_class: FinitePolicyClass  # (h1, h2)
    expert: ExpertPolicy


def counterexample(horizon: int) -> Counterexample:
    """h1/h2 differ only at S0; the expert plays R at S0 and L at S2."""
    mdp = counterexample_mdp(horizon)
    h1 = DeterministicPolicy.from_labels(mdp.labels, {"S0": L, "S2": R}, 2)
    h2 = DeterministicPolicy.from_labels(mdp.labels, {"S0": R, "S2": R}, 2)
    expert = DeterministicPolicy.from_labels(mdp.labels, {"S0": R, "S2": L}, 2)
    return Counterexample(mdp, FinitePolicyClass.from_policies([h1, h2], ["h1", "h2"]), ExpertPolicy(expert))


@dataclass
class CounterexampleReport:
    horizon: int
    J_expert: float
    J_h1: float
    J_h2: float
    F_gaps: list[float]
    mu: float
    h2_fraction: float
    regret_per_round: float
    excess_cost: float  # (1/N) sum_n (J(pi_n) - min_h J(h))
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def counterexample_suite(horizon: int, rounds: int = 200, K: int = 10, seed: int = 0) -> CounterexampleReport:
    """Exact values of the ski example plus a DAgger run with the exact oracle."""
    if horizon < 3:
        raise ValueError("counterexample needs H >= 3")
    ce = counterexample(horizon)
    mdp, cls, expert = ce.mdp, ce.policy_class, ce.expert
    H = horizon
    J_exp, J1, J2 = (expected_cost(mdp, p) for p in (expert, cls[0], cls[1]))
    rollers = [cls[0], cls[1], expert]
    gaps = [exact_Fn(mdp, r, cls[0], expert) - exact_Fn(mdp, r, cls[1], expert) for r in rollers]
    mu = mu_estimate(mdp, expert).mu

    problem = TabularProblem(mdp, cls, expert)
    hist = run_dagger(problem, AlgoConfig("dagger", rounds, K, seed=seed))
    ledger = history_ledger(problem, hist)
    h2_frac = float(np.mean([m == [1] for m in (r.members for r in hist.rounds)]))
    reg_rate = ledger.regret() / rounds
    excess = float(np.mean(ledger.J - min(J1, J2)))
    tol = 1e-12
    checks = {
        "J_expert == 0": abs(J_exp) <= tol,
        "J_h1 == 1": abs(J1 - 1) <= tol,
        "J_h2 == H-1": abs(J2 - (H - 1)) <= tol,
        "F(h1) - F(h2) == 1/H": all(abs(g - 1 / H) <= tol for g in gaps),
        "mu == H-1": abs(mu - (H - 1)) <= tol,
        "h2 fraction >= 0.9": h2_frac >= 0.9,
        "Reg/N <= 0.1/H": reg_rate <= 0.1 / H,
        "excess >= 0.8 (H-2)": excess >= 0.8 * (H - 2),
    }
    return CounterexampleReport(H, J_exp, J1, J2, gaps, mu, h2_frac, reg_rate, excess, checks)


# ------------------------------------------------------------ FTPL rewrite


@dataclass(frozen=True)
class RoundSnapshot:
    past: list[Dataset]  # D_1 .. D_{n-1}
    perturbations: list[Dataset]  # Q_{n,1} .. Q_{n,E}
    members: list[int]
    K: int


def round_snapshot(history: RunHistory, n: int) -> RoundSnapshot:
    if not history.perturbations:
        raise ValueError("run with keep_perturbations=True to snapshot rounds")
    return RoundSnapshot(
        history.datasets[: n - 1], history.perturbations[n - 1], list(history.rounds[n - 1].members),
        history.config.samples_per_round,
    )


def ftpl_rewrite_check(snapshot: RoundSnapshot, policy_class: FinitePolicyClass) -> bool:
    """Each member equals argmin_h <sum_i g_i + g~_{n,e}, e_h>, recomputed in exact rationals."""
    A = policy_class.n_actions
    tables = policy_class.tables.tolist()
    B = len(tables)
    past = [Fraction(0)] * B
    for D in snapshot.past:
        n = len(D)
        for h in range(B):
            wrong = sum(1 for s, a in zip(D.states.tolist(), D.actions.tolist()) if tables[h][s] != a)
            past[h] += Fraction(wrong, n)
    for Q, member in zip(snapshot.perturbations, snapshot.members):
        shift = Fraction(len(Q) * (A - 1), A)
        scores = []
        for h in range(B):
            wrong = sum(1 for s, a in zip(Q.states.tolist(), Q.actions.tolist()) if tables[h][s] != a)
            scores.append(past[h] + (wrong - shift) / snapshot.K)
        best = min(range(B), key=lambda h: (scores[h], h))
        if best != member:
            return False
    return True


# ------------------------------------------------------------ slope fitting


def loglog_slope(ns: Sequence[int], values: Sequence[float]) -> float:
    """Least-squares slope of log(value) against log(n).

    Non-positive values carry no growth; they are floored at 1e-12 so a
    regret curve that never turns positive reports a (very) negative slope.
    """
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.maximum(np.asarray(values, dtype=float), 1e-12))
    return float(np.polyfit(x, y, 1)[0])


def analysis_rows(
    problem: TabularProblem,
    history: RunHistory,
    seed: int,
    mu: float | None = None,
    sigma_inv: float = float("nan"),
) -> list[dict[str, Any]]:
    """One record per round for the analysis CSV."""
    mu = mu_estimate(problem.mdp, problem.expert).mu if mu is None else mu
    ledger = history_ledger(problem, history)
    curve = ledger.regret_curve()
    H = problem.mdp.horizon
    rows = []
    for i, rec in enumerate(history.rounds):
        n = i + 1
        rows.append(
            {
                "algo": history.config.label,
                "seed": seed,
                "round": n,
                "expert_queries": rec.expert_queries,
                "J_exact_or_MC": float(ledger.J[i]),
                "Fn_pi_n": float(ledger.played[i]),
                "reg_cum": float(curve[i]),
                "estgap": mu * H * float(curve[i]) / n,
                "mu": mu,
                "sigma_inv_est": sigma_inv,
            }
        )
    return rows
