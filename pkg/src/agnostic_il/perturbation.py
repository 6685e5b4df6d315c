"""Covering distributions and sample-based perturbations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from agnostic_il.mdp import LayeredMdp, forward_visitation
from agnostic_il.oracles import Dataset, class_losses, load_dataset
from agnostic_il.policies import EnsemblePolicy, FinitePolicyClass

KINDS = ("uniform-over-states", "exact-mixture", "state-pool")


@dataclass(frozen=True, eq=False)
class CoveringDistribution:
    """Sampler for d_0, with an exact pmf whenever the state space is finite."""

    kind: str
    pmf: np.ndarray | None = None
    pool: np.ndarray | None = None
    box: float | None = None
    state_dim: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown covering distribution {self.kind!r}")
        if self.pmf is not None and abs(self.pmf.sum() - 1.0) > 1e-12:
            raise ValueError("pmf must sum to 1")

    @classmethod
    def uniform(cls, n_states: int) -> "CoveringDistribution":
        return cls("uniform-over-states", pmf=np.full(n_states, 1.0 / n_states))

    @classmethod
    def uniform_box(cls, state_dim: int, box: float) -> "CoveringDistribution":
        return cls("uniform-over-states", box=box, state_dim=state_dim)

    @classmethod
    def exact_mixture(cls, mdp: LayeredMdp, policy_class: FinitePolicyClass) -> "CoveringDistribution":
        """Average of the base-class visitation distributions."""
        pmf = np.mean([forward_visitation(mdp, policy_class[i]).d for i in range(len(policy_class))], axis=0)
        return cls("exact-mixture", pmf=pmf / pmf.sum())

    @classmethod
    def state_pool(cls, states: np.ndarray, n_states: int | None = None) -> "CoveringDistribution":
        """Uniform over a collected multiset of states (exact pmf for tabular pools)."""
        states = np.asarray(states)
        if len(states) == 0:
            raise ValueError("state pool is empty")
        pmf = None
        if states.ndim == 1 and n_states is not None:
            pmf = np.bincount(states, minlength=n_states) / len(states)
        return cls("state-pool", pmf=pmf, pool=states)

    @classmethod
    def from_dataset_file(cls, path: str | Path, n_states: int | None = None) -> "CoveringDistribution":
        """State pool from a dataset dump; labels are ignored."""
        return cls.state_pool(load_dataset(path).states, n_states)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.pool is not None:
            return self.pool[rng.integers(0, len(self.pool), size=n)]
        if self.pmf is not None:
            return rng.choice(len(self.pmf), size=n, p=self.pmf)
        return rng.uniform(-self.box, self.box, size=(n, self.state_dim))


def draw_poisson(lam: float, rng: np.random.Generator) -> int:
    if lam < 0:
        raise ValueError("Poisson rate must be non-negative")
    return int(rng.poisson(lam))


def draw_perturbation(
    d0: CoveringDistribution,
    actions: int,
    rng: np.random.Generator,
    *,
    lam: float | None = None,
    fixed: int | None = None,
    continuous: bool = False,
) -> Dataset:
    """X examples from d0 x Unif(actions); X ~ Poi(lam) or X = fixed.

    For continuous problems ``actions`` is the action dimension and labels are
    uniform on [-1, 1]^actions.
    """
    if (lam is None) == (fixed is None):
        raise ValueError("give exactly one of lam or fixed")
    X = draw_poisson(lam, rng) if lam is not None else int(fixed)
    states = d0.sample(X, rng)
    if continuous:
        labels = rng.uniform(-1.0, 1.0, size=(X, actions))
    else:
        labels = rng.integers(0, actions, size=X)
        states = states.astype(np.int64)
    return Dataset(states, labels)


def perturbation_cost_vector(perturbation: Dataset, policy_class: FinitePolicyClass, K: int) -> np.ndarray:
    """g~[h] = (1/K) sum_{(s,a) in Q} (I(h(s) != a) - (A-1)/A)."""
    A = policy_class.n_actions
    counts = perturbation.counts(policy_class.n_states, A)
    return (class_losses(counts, policy_class) - len(perturbation) * (A - 1) / A) / K


class SmoothnessReport(NamedTuple):
    inv_sigma: float  # empirical lower bound on 1/sigma
    witness_state: int
    witness_policy: str

    @property
    def infinite(self) -> bool:
        """d0 misses a state some candidate policy visits."""
        return math.isinf(self.inv_sigma)


def smoothness_estimate(
    mdp: LayeredMdp,
    policy_class: FinitePolicyClass,
    d0: CoveringDistribution,
    mixture_samples: int,
    rng: np.random.Generator,
) -> SmoothnessReport:
    """max over base members and random mixtures of max_s d_pi(s) / d0(s)."""
    if d0.pmf is None:
        raise ValueError("smoothness needs an exact pmf for d0")
    names = policy_class.names or tuple(f"h{i}" for i in range(len(policy_class)))
    candidates = [(names[i], policy_class[i]) for i in range(len(policy_class))]
    for j in range(mixture_samples):
        w = rng.dirichlet(np.ones(len(policy_class)))
        candidates.append((f"mix{j}", EnsemblePolicy.mixture(policy_class, w / w.sum())))
    best = SmoothnessReport(0.0, -1, "")
    for name, pi in candidates:
        d = forward_visitation(mdp, pi).d
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(d > 0, d / d0.pmf, 0.0)
        s = int(np.argmax(ratio))
        if ratio[s] > best.inv_sigma:
            best = SmoothnessReport(float(ratio[s]), s, name)
    return best


class BiasCheck(NamedTuple):
    mean: float
    stderr: float
    bound: float


def bias_bound_check(
    d0: CoveringDistribution,
    policy_class: FinitePolicyClass,
    lam: float,
    K: int,
    trials: int,
    rng: np.random.Generator,
) -> BiasCheck:
    """Monte Carlo E[max_h (X(A-1)/A - sum I(h(s)!=a))/K] vs sqrt(lam ln B / (2K^2))."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    A = policy_class.n_actions
    values = np.empty(trials)
    for i in range(trials):
        Q = draw_perturbation(d0, A, rng, lam=lam)
        values[i] = np.max(-perturbation_cost_vector(Q, policy_class, K))
    bound = float(np.sqrt(lam * np.log(len(policy_class)) / (2 * K**2)))
    stderr = float(values.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return BiasCheck(float(values.mean()), stderr, bound)


def theory_lambda(n_actions: int, K: int, sigma: float, rounds: int) -> float:
    """Smallest budget allowed by the stability analysis: max(2AK^2/sigma, 8AK ln(KN)/sigma)."""
    A = n_actions
    return max(2 * A * K**2 / sigma, 8 * A * K * np.log(K * rounds) / sigma)
