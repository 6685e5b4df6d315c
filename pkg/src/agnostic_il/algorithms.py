"""Behavior Cloning, DAgger, MFTPL-P and Bootstrap-DAgger over one online loop.

Every learner issues exactly K expert annotations per round. Randomness is
drawn from streams keyed by (seed, round, member, purpose), so ensemble
members can be trained in any order with identical results.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

from agnostic_il import seeding
from agnostic_il.linear_env import LinearEnv
from agnostic_il.mdp import LayeredMdp, sample_visitation_states
from agnostic_il.oracles import LOSSES, Dataset, bootstrap_resample, erm_01, ols_fit
from agnostic_il.perturbation import CoveringDistribution, draw_perturbation
from agnostic_il.policies import (
    EnsemblePolicy,
    ExpertPolicy,
    FinitePolicyClass,
    LinearPolicy,
    MeanEnsemble,
)

ALGORITHMS = ("bc", "dagger", "mftpl-p", "bootstrap-dagger")


@dataclass(frozen=True)
class AlgoConfig:
    algorithm: str
    rounds: int
    samples_per_round: int
    ensemble_size: int = 1
    lam: float | None = None
    fixed_x: int | None = None
    loss: str = "zero-one"
    delta: float = 0.1  # reporting only
    seed: int = 0
    sampling: str = "iid"
    keep_perturbations: bool = False
    name: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if min(self.rounds, self.samples_per_round, self.ensemble_size) < 1:
            raise ValueError("rounds, samples_per_round and ensemble_size must be >= 1")
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.algorithm == "mftpl-p":
            if (self.lam is None) == (self.fixed_x is None):
                raise ValueError("mftpl-p needs exactly one of lam or fixed_x")
            if (self.lam is not None and self.lam < 0) or (self.fixed_x is not None and self.fixed_x < 0):
                raise ValueError("perturbation budget must be non-negative")
        if self.sampling not in ("iid", "slice"):
            raise ValueError("sampling must be 'iid' or 'slice'")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        E = self.ensemble_size
        if self.algorithm == "mftpl-p":
            budget = f"{self.fixed_x}" if self.fixed_x is not None else f"poi{self.lam:g}"
            return f"MP-{E}({budget})"
        if self.algorithm == "bootstrap-dagger":
            return f"BD-{E}"
        return {"bc": "BC", "dagger": "DAgger"}[self.algorithm]


# ----------------------------------------------------------------- problems


class TabularProblem:
    """Layered MDP + finite class + exact 0-1 ERM oracle."""

    discrete = True

    def __init__(
        self,
        mdp: LayeredMdp,
        policy_class: FinitePolicyClass,
        expert: ExpertPolicy,
        d0: CoveringDistribution | None = None,
    ):
        if policy_class.n_states != mdp.n_states or policy_class.n_actions != mdp.n_actions:
            raise ValueError("policy class does not match the MDP")
        self.mdp = mdp
        self.policy_class = policy_class
        self.expert = expert
        self.d0 = d0

    @property
    def horizon(self) -> int:
        return self.mdp.horizon

    def empty(self) -> Dataset:
        return Dataset.empty()

    def fit(self, dataset: Dataset) -> int:
        return erm_01(dataset, self.policy_class)[0]

    def policy(self, members: list[int]) -> EnsemblePolicy:
        return EnsemblePolicy.from_class(self.policy_class, members)

    def sample_states(self, policy, K: int, rng: np.random.Generator, mode: str) -> np.ndarray:
        return sample_visitation_states(self.mdp, policy, K, rng, mode)

    def perturb(self, rng: np.random.Generator, lam: float | None, fixed: int | None) -> Dataset:
        if self.d0 is None:
            raise ValueError("mftpl-p needs a covering distribution")
        return draw_perturbation(self.d0, self.mdp.n_actions, rng, lam=lam, fixed=fixed)

    def snapshot(self, member: int) -> int:
        return int(member)


class ContinuousProblem:
    """Linear-dynamics task + linear class + OLS oracle."""

    discrete = False

    def __init__(self, env: LinearEnv, expert: ExpertPolicy, d0: CoveringDistribution | None = None):
        self.env = env
        self.expert = expert
        self.d0 = d0

    @property
    def horizon(self) -> int:
        return self.env.horizon

    def empty(self) -> Dataset:
        return Dataset.empty(self.env.state_dim, self.env.action_dim)

    def fit(self, dataset: Dataset) -> LinearPolicy:
        return ols_fit(dataset, self.env.state_dim, self.env.action_dim)

    def policy(self, members: list[LinearPolicy]) -> MeanEnsemble:
        return MeanEnsemble(members)

    def sample_states(self, policy, K: int, rng: np.random.Generator, mode: str) -> np.ndarray:
        return self.env.sample_visitation_states(policy, K, rng, mode)

    def perturb(self, rng: np.random.Generator, lam: float | None, fixed: int | None) -> Dataset:
        if self.d0 is None:
            raise ValueError("mftpl-p needs a covering distribution")
        return draw_perturbation(self.d0, self.env.action_dim, rng, lam=lam, fixed=fixed, continuous=True)

    def snapshot(self, member: LinearPolicy) -> list[list[float]]:
        return member.weights.tolist()


Problem = TabularProblem | ContinuousProblem


# ------------------------------------------------------------------ history


@dataclass
class RoundRecord:
    round: int
    members: list[Any]  # pi_{n,e}: class indices (tabular) or weight matrices
    perturbation_sizes: list[int]
    new_examples: int
    dataset_size: int
    expert_queries: int
    wall_ms: float = 0.0


@dataclass
class RunHistory:
    config: AlgoConfig
    rounds: list[RoundRecord] = field(default_factory=list)
    final_members: list[Any] = field(default_factory=list)  # pi_{N+1,e}
    datasets: list[Dataset] = field(default_factory=list, repr=False)  # D_n
    perturbations: list[list[Dataset]] = field(default_factory=list, repr=False)
    _policies: list[Any] = field(default_factory=list, repr=False)
    _final_policy: Any = field(default=None, repr=False)

    @property
    def n_rounds(self) -> int:
        return len(self.rounds)

    def policy(self, n: int):
        """The ensemble pi_n played in round n (1-based)."""
        return self._policies[n - 1]

    @property
    def policies(self) -> list[Any]:
        return list(self._policies)

    def returned_policy(self, n: int):
        """Policy trained after round n, i.e. pi_{n+1}."""
        return self._policies[n] if n < self.n_rounds else self._final_policy

    def aggregate(self, n: int) -> Dataset:
        """D_{1:n}."""
        out = self.datasets[0]
        for d in self.datasets[1:n]:
            out = out.union(d)
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": asdict(self.config),
            "rounds": [asdict(r) for r in self.rounds],
            "final_members": self.final_members,
        }


# --------------------------------------------------------------------- loop


TrainBase = Callable[[Dataset, np.random.Generator], tuple[Any, Dataset | None]]


def _online_loop(problem: Problem, config: AlgoConfig, train_base: TrainBase, expert_data: bool = False) -> RunHistory:
    hist = RunHistory(config)
    D = problem.empty()
    K, E, seed = config.samples_per_round, config.ensemble_size, config.seed
    queries = 0

    def train_round(n: int) -> tuple[list[Any], list[Dataset]]:
        members, perturbations = [], []
        for e in range(E):
            member, Q = train_base(D, seeding.derive_rng(seed, n, e, seeding.TRAIN))
            members.append(member)
            if Q is not None:
                perturbations.append(Q)
        return members, perturbations

    for n in range(1, config.rounds + 1):
        start = time.perf_counter()
        members, perturbations = train_round(n)
        policy = problem.policy(members)
        rng = seeding.derive_rng(seed, n, seeding.COLLECT)
        roller = problem.expert if expert_data else policy
        states = problem.sample_states(roller, K, rng, config.sampling)
        Dn = Dataset(states, problem.expert.annotate(states, rng))
        queries += len(Dn)
        D = D.union(Dn)
        hist._policies.append(policy)
        hist.datasets.append(Dn)
        if config.keep_perturbations:
            hist.perturbations.append(perturbations)
        hist.rounds.append(
            RoundRecord(
                round=n,
                members=[problem.snapshot(m) for m in members],
                perturbation_sizes=[len(q) for q in perturbations],
                new_examples=len(Dn),
                dataset_size=len(D),
                expert_queries=queries,
                wall_ms=(time.perf_counter() - start) * 1e3,
            )
        )
    final, _ = train_round(config.rounds + 1)
    hist.final_members = [problem.snapshot(m) for m in final]
    hist._final_policy = problem.policy(final)
    return hist


def run_bc(problem: Problem, config: AlgoConfig) -> RunHistory:
    """Supervised learning on K fresh expert-trajectory states per round."""
    return _online_loop(problem, config, lambda D, rng: (problem.fit(D), None), expert_data=True)


def run_dagger(problem: Problem, config: AlgoConfig) -> RunHistory:
    return _online_loop(problem, config, lambda D, rng: (problem.fit(D), None))


def run_mftpl_p(problem: Problem, config: AlgoConfig) -> RunHistory:
    """Each member is the oracle on D plus a fresh perturbation set from d0 x Unif(A)."""

    def train_base(D: Dataset, rng: np.random.Generator):
        Q = problem.perturb(rng, config.lam, config.fixed_x)
        return problem.fit(D.union(Q)), Q

    return _online_loop(problem, config, train_base)


def run_bootstrap_dagger(problem: Problem, config: AlgoConfig) -> RunHistory:
    """Each member is the oracle on an independent bootstrap resample of D."""
    return _online_loop(problem, config, lambda D, rng: (problem.fit(bootstrap_resample(D, rng)), None))


RUNNERS = {
    "bc": run_bc,
    "dagger": run_dagger,
    "mftpl-p": run_mftpl_p,
    "bootstrap-dagger": run_bootstrap_dagger,
}


def run(problem: Problem, config: AlgoConfig) -> RunHistory:
    return RUNNERS[config.algorithm](problem, config)


def aggregate_policies(history: RunHistory, rng: np.random.Generator, mode: str = "uniform"):
    """Return pi_{n_hat} with n_hat ~ Unif([N]) (``uniform``) or pi_{N+1} (``final``)."""
    if mode == "uniform":
        n_hat = int(rng.integers(1, history.n_rounds + 1))
        return n_hat, history.policy(n_hat)
    if mode == "final":
        return history.n_rounds + 1, history.returned_policy(history.n_rounds)
    raise ValueError(f"unknown aggregation mode {mode!r}")
