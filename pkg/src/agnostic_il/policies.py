"""Deterministic tables, finite policy classes, vote ensembles, linear policies."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

UNDEFINED = -1


def _one_hot(table: np.ndarray, n_actions: int) -> np.ndarray:
    probs = np.zeros((len(table), n_actions))
    defined = table != UNDEFINED
    probs[np.flatnonzero(defined), table[defined]] = 1.0
    probs[~defined] = np.nan
    return probs


class DeterministicPolicy:
    """Table ``state -> action``; ``UNDEFINED`` entries mark missing states."""

    def __init__(self, table: Sequence[int] | np.ndarray, n_actions: int, name: str | None = None):
        table = np.asarray(table, dtype=np.int64)
        if table.ndim != 1:
            raise ValueError("policy table must be 1-D")
        if np.any((table < UNDEFINED) | (table >= n_actions)):
            raise ValueError("actions out of range")
        table.setflags(write=False)
        self.table = table
        self.n_actions = int(n_actions)
        self.name = name

    @classmethod
    def from_labels(cls, labels: Sequence[str], mapping: Mapping[str, int], n_actions: int, default: int = 0):
        """Table that depends on a state only through its label."""
        return cls([mapping.get(lab, default) for lab in labels], n_actions)

    @property
    def probs(self) -> np.ndarray:
        return _one_hot(self.table, self.n_actions)

    def act(self, state: int, rng: np.random.Generator | None = None) -> int:
        a = int(self.table[state])
        if a == UNDEFINED:
            raise ValueError(f"policy undefined on state {state}")
        return a

    def __repr__(self) -> str:
        return f"DeterministicPolicy({self.name or self.table.tolist()})"


class StochasticPolicy:
    """Arbitrary per-state action distribution."""

    def __init__(self, probs: np.ndarray):
        probs = np.asarray(probs, dtype=float)
        if np.any(probs < 0) or np.any(np.abs(probs.sum(axis=1) - 1) > 1e-12):
            raise ValueError("rows must be probability vectors")
        self.probs = probs
        self.n_actions = probs.shape[1]

    @classmethod
    def random(cls, n_states: int, n_actions: int, rng: np.random.Generator) -> "StochasticPolicy":
        p = rng.dirichlet(np.ones(n_actions), size=n_states)
        return cls(p / p.sum(axis=1, keepdims=True))

    def act(self, state: int, rng: np.random.Generator) -> int:
        return int(rng.choice(self.n_actions, p=self.probs[state]))


@dataclass(frozen=True, eq=False)
class FinitePolicyClass:
    """Ordered base class; row ``i`` of ``tables`` is member ``i``.

    Order is the oracle's tie-break authority.
    """

    tables: np.ndarray  # (B, S) int
    n_actions: int
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        tables = np.asarray(self.tables, dtype=np.int64)
        if tables.ndim != 2 or len(tables) == 0:
            raise ValueError("policy class must be a nonempty (B, S) table")
        if np.any((tables < 0) | (tables >= self.n_actions)):
            raise ValueError("class members must be total with actions in range")
        tables.setflags(write=False)
        object.__setattr__(self, "tables", tables)
        if self.names is not None and len(self.names) != len(tables):
            raise ValueError("one name per member")

    def __len__(self) -> int:
        return len(self.tables)

    def __getitem__(self, i: int) -> DeterministicPolicy:
        return DeterministicPolicy(self.tables[i], self.n_actions, self.names[i] if self.names else None)

    @property
    def n_states(self) -> int:
        return self.tables.shape[1]

    def index_of(self, name: str) -> int:
        if not self.names:
            raise KeyError(name)
        return self.names.index(name)

    def to_dict(self) -> dict:
        return {"n_actions": self.n_actions, "tables": self.tables.tolist(), "names": list(self.names or [])}

    @classmethod
    def from_dict(cls, doc: dict) -> "FinitePolicyClass":
        return cls(np.array(doc["tables"], dtype=np.int64), doc["n_actions"], tuple(doc["names"]) or None)

    # -- generators

    @classmethod
    def from_policies(cls, policies: Sequence[DeterministicPolicy], names: Sequence[str] | None = None):
        return cls(np.stack([p.table for p in policies]), policies[0].n_actions, tuple(names) if names else None)

    @classmethod
    def constant(cls, n_states: int, n_actions: int) -> "FinitePolicyClass":
        tables = np.repeat(np.arange(n_actions)[:, None], n_states, axis=1)
        return cls(tables, n_actions, tuple(f"const{a}" for a in range(n_actions)))

    @classmethod
    def random_tables(cls, size: int, n_states: int, n_actions: int, rng: np.random.Generator):
        return cls(rng.integers(0, n_actions, size=(size, n_states)), n_actions)

    @classmethod
    def corruptions(
        cls,
        expert_table: np.ndarray,
        n_actions: int,
        size: int,
        k: int,
        rng: np.random.Generator,
        states: Sequence[int] | None = None,
    ) -> "FinitePolicyClass":
        """``size`` copies of the expert, each with ``k`` states relabelled.

        With ``k >= 1`` and ``n_actions >= 2`` the expert is not a member.
        """
        expert_table = np.asarray(expert_table, dtype=np.int64)
        pool = np.arange(len(expert_table)) if states is None else np.asarray(states)
        if k > len(pool):
            raise ValueError("more corruptions than candidate states")
        tables = np.repeat(expert_table[None], size, axis=0)
        for row in tables:
            picked = rng.choice(pool, size=k, replace=False)
            shift = rng.integers(1, n_actions, size=k) if n_actions > 1 else 0
            row[picked] = (row[picked] + shift) % n_actions
        return cls(tables, n_actions)


class EnsemblePolicy:
    """Mixed policy pi_w(a|s) = sum_e w_e I(h_e(s) = a) over member tables."""

    def __init__(self, tables: np.ndarray, n_actions: int, weights: np.ndarray | None = None):
        tables = np.atleast_2d(np.asarray(tables, dtype=np.int64))
        if len(tables) == 0:
            raise ValueError("ensemble needs at least one member")
        if weights is None:
            weights = np.full(len(tables), 1.0 / len(tables))
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (len(tables),) or np.any(weights < 0) or abs(weights.sum() - 1) > 1e-12:
            raise ValueError("weights must be a probability vector over members")
        self.tables = tables
        self.weights = weights
        self.n_actions = int(n_actions)

    @classmethod
    def from_class(cls, policy_class: FinitePolicyClass, members: Sequence[int]) -> "EnsemblePolicy":
        return cls(policy_class.tables[np.asarray(members, dtype=np.int64)], policy_class.n_actions)

    @classmethod
    def mixture(cls, policy_class: FinitePolicyClass, w: np.ndarray) -> "EnsemblePolicy":
        """pi_w for a weight vector over the whole class."""
        return cls(policy_class.tables, policy_class.n_actions, w)

    def __len__(self) -> int:
        return len(self.tables)

    @property
    def probs(self) -> np.ndarray:
        S = self.tables.shape[1]
        probs = np.zeros((S, self.n_actions))
        cols = np.arange(S)
        for w, row in zip(self.weights, self.tables):
            probs[cols, row] += w
        return probs

    def vote_distribution(self, state: int) -> np.ndarray:
        return vote_distribution(self, state)

    def act(self, state: int, rng: np.random.Generator) -> int:
        e = rng.choice(len(self.tables), p=self.weights)
        return int(self.tables[e, state])


def vote_distribution(ensemble: EnsemblePolicy, state: int) -> np.ndarray:
    """Exact weighted vote counts at ``state`` (1/E each for uniform ensembles)."""
    votes = np.zeros(ensemble.n_actions)
    np.add.at(votes, ensemble.tables[:, state], ensemble.weights)
    return votes


# ---------------------------------------------------------------- continuous


@dataclass(frozen=True, eq=False)
class LinearPolicy:
    """a = clip(W s, -1, 1); W has shape (action_dim, state_dim)."""

    weights: np.ndarray

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "weights", W)

    @classmethod
    def zeros(cls, state_dim: int, action_dim: int) -> "LinearPolicy":
        return cls(np.zeros((action_dim, state_dim)))

    @property
    def state_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def action_dim(self) -> int:
        return self.weights.shape[0]

    def act(self, state: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        return np.clip(np.asarray(state) @ self.weights.T, -1.0, 1.0)


@dataclass(frozen=True, eq=False)
class TanhPolicy:
    """a = tanh(G s); outside the linear class for any nonzero G."""

    gain: np.ndarray

    def act(self, state: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        return np.tanh(np.asarray(state) @ np.atleast_2d(self.gain).T)


def ensemble_mean(members: Sequence[LinearPolicy], state: np.ndarray) -> np.ndarray:
    """Coordinatewise mean of the clipped member actions (bagging)."""
    return np.mean([m.act(state) for m in members], axis=0)


class MeanEnsemble:
    """Continuous ensemble acting with ``ensemble_mean``."""

    def __init__(self, members: Sequence[LinearPolicy]):
        if not members:
            raise ValueError("ensemble needs at least one member")
        self.members = list(members)

    def act(self, state: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        return ensemble_mean(self.members, state)


class ExpertPolicy:
    """Expert wrapper; Gaussian noise is applied only to annotations."""

    def __init__(self, policy, noise_scale: float = 0.0):
        if isinstance(policy, DeterministicPolicy) and noise_scale:
            raise ValueError("discrete experts are deterministic")
        self.policy = policy
        self.noise_scale = float(noise_scale)

    @property
    def discrete(self) -> bool:
        return isinstance(self.policy, DeterministicPolicy)

    @property
    def table(self) -> np.ndarray:
        return self.policy.table

    @property
    def probs(self) -> np.ndarray:
        return self.policy.probs

    def act(self, state, rng: np.random.Generator | None = None):
        return self.policy.act(state, rng)

    def annotate(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.discrete:
            return self.policy.table[np.asarray(states)]
        actions = self.policy.act(np.asarray(states))
        if self.noise_scale:
            actions = actions + self.noise_scale * rng.standard_normal(actions.shape)
        return actions
