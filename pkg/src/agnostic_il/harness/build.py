"""Turn an ExperimentConfig into a concrete problem instance."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from agnostic_il import seeding
from agnostic_il.algorithms import AlgoConfig, ContinuousProblem, Problem, TabularProblem, run_dagger
from agnostic_il.analysis import counterexample, mu_estimate
from agnostic_il.harness.config import ConfigError, ExperimentConfig
from agnostic_il.linear_env import linear_tracking_env
from agnostic_il.mdp import LayeredMdp, chain_mdp, fork_expert_table, fork_mdp, optimal_policy, random_mdp
from agnostic_il.perturbation import CoveringDistribution, smoothness_estimate
from agnostic_il.policies import DeterministicPolicy, ExpertPolicy, FinitePolicyClass

SMOOTHNESS_MIXTURES = 20


@dataclass
class Setup:
    problem: Problem
    mu: float  # nan for continuous problems
    sigma_inv: float  # empirical 1/sigma of d0; nan when unknown


def fork_policy_class(horizon: int, size: int, rng: np.random.Generator, flip: float = 0.3) -> FinitePolicyClass:
    """{all-0, all-1} plus ``size - 2`` dominated distractors.

    Each distractor copies one of the two constants and takes the non-expert
    action on a random ``flip`` fraction of the non-root states.
    """
    if size < 2:
        raise ConfigError("the fork class needs at least the two constant policies")
    expert = fork_expert_table(horizon)
    S = len(expert)
    tables = [np.zeros(S, dtype=np.int64), np.ones(S, dtype=np.int64)]
    for i in range(size - 2):
        flipped = (rng.random(S) < flip) & (np.arange(S) > 0)
        tables.append(np.where(flipped, 1 - expert, tables[i % 2]))
    names = ["hA", "hB"] + [f"distractor{i}" for i in range(size - 2)]
    return FinitePolicyClass(np.array(tables), 2, tuple(names))


def _tabular_parts(config: ExperimentConfig) -> tuple[LayeredMdp, FinitePolicyClass, ExpertPolicy]:
    env, ex, cs = config.env, config.expert, config.policy_class
    env_rng = seeding.derive_rng(env.seed, seeding.SETUP, "env")
    class_rng = seeding.derive_rng(cs.seed, seeding.SETUP, "class")

    if env.kind == "counterexample":
        ce = counterexample(env.horizon)
        return ce.mdp, ce.policy_class, ce.expert
    if env.kind == "fork":
        mdp = fork_mdp(env.horizon, env.slip)
        expert = ExpertPolicy(DeterministicPolicy(fork_expert_table(env.horizon), 2, "expert"))
        return mdp, fork_policy_class(env.horizon, cs.size, class_rng), expert

    if env.kind == "chain":
        mdp = chain_mdp(env.horizon, env.n_actions, env.width)
    else:
        mdp = random_mdp(env.horizon, env.width, env.n_actions, env_rng, support=env.support)
    if ex.kind == "optimal":
        table = optimal_policy(mdp)
    elif ex.kind == "random":
        table = env_rng.integers(0, mdp.n_actions, size=mdp.n_states)
    else:
        raise ConfigError(f"expert kind {ex.kind!r} does not apply to {env.kind}")
    expert = ExpertPolicy(DeterministicPolicy(table, mdp.n_actions, "expert"))

    if cs.kind == "corruptions":
        cls = FinitePolicyClass.corruptions(table, mdp.n_actions, cs.size, ex.corruptions, class_rng)
    elif cs.kind == "random":
        cls = FinitePolicyClass.random_tables(cs.size, mdp.n_states, mdp.n_actions, class_rng)
    elif cs.kind == "constant":
        cls = FinitePolicyClass.constant(mdp.n_states, mdp.n_actions)
    else:
        raise ConfigError(f"class kind {cs.kind!r} does not apply to {env.kind}")
    if cs.include_expert:
        cls = FinitePolicyClass(np.vstack([cls.tables, table[None]]), mdp.n_actions)
    return mdp, cls, expert


def _state_pool(problem: Problem, config: ExperimentConfig) -> np.ndarray:
    """States visited by short DAgger runs; seeds are disjoint from experiment seeds via the SETUP tag."""
    states = []
    algo = config.algorithms[0]
    for r in range(config.d0.pool_runs):
        seed = int(seeding.derive_rng(r, seeding.SETUP, "pool").integers(2**31))
        cfg = AlgoConfig("dagger", config.d0.pool_rounds, algo.samples_per_round, seed=seed)
        hist = run_dagger(problem, cfg)
        states.extend(d.states for d in hist.datasets)
    return np.concatenate(states)


def build_problem(config: ExperimentConfig) -> Setup:
    env, d0_spec = config.env, config.d0
    if env.continuous:
        rng = seeding.derive_rng(env.seed, seeding.SETUP, "env")
        lin, gain = linear_tracking_env(env.state_dim, env.action_dim, env.horizon, rng, env.noise)
        problem = ContinuousProblem(lin, ExpertPolicy(gain, config.expert.noise_scale))
        if d0_spec.kind == "uniform-over-states":
            problem.d0 = CoveringDistribution.uniform_box(lin.state_dim, d0_spec.box)
        elif d0_spec.kind == "state-pool":
            problem.d0 = CoveringDistribution.state_pool(_state_pool(problem, config))
        elif d0_spec.kind == "exact-mixture":
            raise ConfigError("exact-mixture d0 needs a tabular environment")
        return Setup(problem, math.nan, math.nan)

    mdp, cls, expert = _tabular_parts(config)
    problem = TabularProblem(mdp, cls, expert)
    if d0_spec.kind == "uniform-over-states":
        problem.d0 = CoveringDistribution.uniform(mdp.n_states)
    elif d0_spec.kind == "exact-mixture":
        problem.d0 = CoveringDistribution.exact_mixture(mdp, cls)
    elif d0_spec.kind == "state-pool":
        problem.d0 = CoveringDistribution.state_pool(_state_pool(problem, config), mdp.n_states)

    sigma_inv = math.nan
    if problem.d0 is not None:
        rng = seeding.derive_rng(env.seed, seeding.SETUP, "smoothness")
        sigma_inv = smoothness_estimate(mdp, cls, problem.d0, SMOOTHNESS_MIXTURES, rng).inv_sigma
    return Setup(problem, mu_estimate(mdp, expert).mu, sigma_inv)
