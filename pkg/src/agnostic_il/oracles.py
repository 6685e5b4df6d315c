"""Datasets and offline learning oracles.

The discrete oracle is exact 0-1 ERM over an explicit finite class with
lowest-index tie-breaking; the continuous oracle is minimum-norm OLS.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from agnostic_il.policies import FinitePolicyClass, LinearPolicy

LOSSES = ("zero-one", "clipped-mse", "absolute")
PINV_RCOND = 1e-10


@dataclass(frozen=True, eq=False)
class Dataset:
    """Multiset of (state, action) examples.

    Discrete data holds 1-D integer arrays; continuous data holds 2-D float
    arrays of shape (n, dim).
    """

    states: np.ndarray
    actions: np.ndarray

    def __post_init__(self):
        if len(self.states) != len(self.actions):
            raise ValueError("states and actions must have equal length")

    @classmethod
    def empty(cls, state_dim: int | None = None, action_dim: int | None = None) -> "Dataset":
        if state_dim is None:
            return cls(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
        return cls(np.zeros((0, state_dim)), np.zeros((0, action_dim)))

    def __len__(self) -> int:
        return len(self.states)

    @property
    def discrete(self) -> bool:
        return self.states.ndim == 1

    def union(self, other: "Dataset") -> "Dataset":
        return Dataset(np.concatenate([self.states, other.states]), np.concatenate([self.actions, other.actions]))

    def take(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.states[idx], self.actions[idx])

    def counts(self, n_states: int, n_actions: int) -> np.ndarray:
        """(S, A) multiplicity table of a discrete dataset."""
        flat = np.bincount(self.states * n_actions + self.actions, minlength=n_states * n_actions)
        return flat.reshape(n_states, n_actions)

    def __eq__(self, other: Any) -> bool:
        return (
            isinstance(other, Dataset)
            and self.states.shape == other.states.shape
            and self.actions.shape == other.actions.shape
            and np.array_equal(self.states, other.states)
            and np.array_equal(self.actions, other.actions)
        )


def dump_dataset(dataset: Dataset, path: str | Path) -> None:
    """One example per line: ``state<TAB>action``; vectors are comma-joined reprs."""
    lines = []
    if dataset.discrete:
        lines.append("# discrete")
        lines += [f"{s}\t{a}" for s, a in zip(dataset.states.tolist(), dataset.actions.tolist())]
    else:
        lines.append(f"# continuous {dataset.states.shape[1]} {dataset.actions.shape[1]}")
        for s, a in zip(dataset.states.tolist(), dataset.actions.tolist()):
            lines.append(",".join(map(repr, s)) + "\t" + ",".join(map(repr, a)))
    Path(path).write_text("\n".join(lines) + "\n")


def load_dataset(path: str | Path) -> Dataset:
    header, *rows = Path(path).read_text().splitlines()
    kind = header.lstrip("# ").split()
    if kind[0] == "discrete":
        pairs = [r.split("\t") for r in rows if r]
        s = np.array([int(p[0]) for p in pairs], dtype=np.int64)
        a = np.array([int(p[1]) for p in pairs], dtype=np.int64)
        return Dataset(s, a)
    if kind[0] != "continuous":
        raise ValueError(f"unknown dataset header {header!r}")
    ds, da = int(kind[1]), int(kind[2])
    s_rows, a_rows = [], []
    for r in rows:
        if not r:
            continue
        left, right = r.split("\t")
        s_rows.append([float(x) for x in left.split(",")])
        a_rows.append([float(x) for x in right.split(",")])
    s = np.array(s_rows, dtype=float).reshape(-1, ds)
    a = np.array(a_rows, dtype=float).reshape(-1, da)
    return Dataset(s, a)


# ------------------------------------------------------------------ oracles


def class_losses(counts: np.ndarray, policy_class: FinitePolicyClass) -> np.ndarray:
    """Total 0-1 loss of every member given an (S, A) count table."""
    agree = counts[np.arange(policy_class.n_states), policy_class.tables].sum(axis=1)
    return counts.sum() - agree


def erm_01_counts(counts: np.ndarray, policy_class: FinitePolicyClass) -> tuple[int, int]:
    losses = class_losses(counts, policy_class)
    best = int(np.argmin(losses))  # first minimiser = lowest index
    return best, int(losses[best])


def erm_01(dataset: Dataset, policy_class: FinitePolicyClass) -> tuple[int, int]:
    """argmin_h sum I(h(s) != a); returns (member index, loss count)."""
    counts = dataset.counts(policy_class.n_states, policy_class.n_actions)
    return erm_01_counts(counts, policy_class)


def ols_fit(dataset: Dataset, state_dim: int | None = None, action_dim: int | None = None) -> LinearPolicy:
    """Minimum-norm least squares W with a ~ W s, via the pseudoinverse."""
    X, Y = dataset.states, dataset.actions
    if X.ndim != 2 or Y.ndim != 2:
        raise ValueError("OLS needs continuous (n, dim) states and actions")
    ds = X.shape[1] if state_dim is None else state_dim
    da = Y.shape[1] if action_dim is None else action_dim
    if X.shape[1] != ds or Y.shape[1] != da:
        raise ValueError(f"dimension mismatch: data {X.shape[1]}->{Y.shape[1]}, expected {ds}->{da}")
    if len(X) == 0:
        return LinearPolicy.zeros(ds, da)
    W = (np.linalg.pinv(X, rcond=PINV_RCOND) @ Y).T
    return LinearPolicy(W)


def bootstrap_resample(dataset: Dataset, rng: np.random.Generator) -> Dataset:
    """|D| draws from Unif(D) with replacement."""
    n = len(dataset)
    return dataset.take(rng.integers(0, n, size=n)) if n else dataset


# ------------------------------------------------------------------- losses


def pointwise_loss(kind: str, pred: np.ndarray, label: np.ndarray) -> np.ndarray:
    """Per-example loss between predicted and labelled actions."""
    if kind == "zero-one":
        return (np.asarray(pred) != np.asarray(label)).astype(float)
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    label = np.atleast_2d(np.asarray(label, dtype=float))
    if kind == "clipped-mse":
        diff = np.clip(pred, -1, 1) - np.clip(label, -1, 1)
        return (diff**2).mean(axis=1)
    if kind == "absolute":
        return np.linalg.norm(pred - label, axis=1)
    raise ValueError(f"unknown loss {kind!r}; expected one of {LOSSES}")


def empirical_loss(dataset: Dataset, policy, loss: str) -> float:
    if len(dataset) == 0:
        return 0.0
    if dataset.discrete:
        if loss != "zero-one":
            raise ValueError("discrete datasets use the zero-one loss")
        probs = policy.probs
        return float(np.mean(1.0 - probs[dataset.states, dataset.actions]))
    pred = policy.act(dataset.states)
    return float(np.mean(pointwise_loss(loss, pred, dataset.actions)))
