"""Rollout evaluation and percentile-bootstrap summaries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from agnostic_il.linear_env import LinearEnv
from agnostic_il.mdp import LayeredMdp, simulate


def evaluate_policy(env: LayeredMdp | LinearEnv, policy: Any, T: int, rng: np.random.Generator):
    """Mean cumulative cost over T independent rollouts, and the per-rollout costs."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if isinstance(env, LinearEnv):
        _, _, costs = env.simulate(policy, T, rng)
    else:
        _, _, costs = simulate(env, policy, T, rng)
    values = costs.sum(axis=1)
    return float(values.mean()), values


def evaluate_mixture(env: LayeredMdp | LinearEnv, policies: Sequence[Any], T: int, rng: np.random.Generator):
    """Uniform-over-rounds mixture: each rollout first draws which policy to follow."""
    if T < 1:
        raise ValueError("T must be >= 1")
    picks = rng.integers(0, len(policies), size=T)
    values = np.empty(T)
    for i in np.unique(picks):
        mask = picks == i
        values[mask] = evaluate_policy(env, policies[i], int(mask.sum()), rng)[1]
    return float(values.mean()), values


def bootstrap_ci(
    values: Sequence[float], quantiles: Sequence[float], resamples: int, rng: np.random.Generator
) -> np.ndarray:
    """Quantiles of the resampled mean (percentile bootstrap)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("bootstrap needs at least one value")
    idx = rng.integers(0, len(values), size=(resamples, len(values)))
    means = values[idx].mean(axis=1)
    return np.quantile(means, np.asarray(quantiles, dtype=float))


def quantile_key(q: float) -> str:
    return f"q{100 * q:g}"


@dataclass(frozen=True)
class EvalSummary:
    algo: str
    round: int
    mean: float
    quantiles: dict[str, float]  # e.g. {"q10": ..., "q90": ...}
    n_seeds: int

    def to_dict(self) -> dict[str, Any]:
        return {"algo": self.algo, "round": self.round, "mean": self.mean, **self.quantiles, "n_seeds": self.n_seeds}


def summarize(
    algo: str, round_: int, seed_values: Sequence[float], quantiles: Sequence[float], resamples: int,
    rng: np.random.Generator,
) -> EvalSummary:
    qs = bootstrap_ci(seed_values, quantiles, resamples, rng)
    return EvalSummary(
        algo, round_, float(np.mean(seed_values)),
        {quantile_key(q): float(v) for q, v in zip(quantiles, qs)}, len(seed_values),
    )
