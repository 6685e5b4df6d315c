"""Finite layered episodic MDPs: exact dynamic programming and simulation.

State ids are contiguous per layer: layer ``t`` (0-based) owns ids
``offsets[t] .. offsets[t+1]-1``. Transitions out of the last layer are all
zero (terminal), so ``Q`` there is the mean cost alone.

Anything exposing a ``probs`` attribute of shape ``(S, A)`` (or a raw array of
that shape) is accepted as a policy. Rows of NaN mark states on which a
policy is undefined.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

ATOL = 1e-12


class PolicyUndefinedError(ValueError):
    """Raised when a policy has no action distribution at a reachable state."""

    def __init__(self, state: int, label: str | None = None):
        self.state = state
        self.label = label
        name = f"{state} ({label})" if label else str(state)
        super().__init__(f"policy undefined on reachable state {name}")


@dataclass(frozen=True, eq=False)
class LayeredMdp:
    layer_sizes: tuple[int, ...]
    n_actions: int
    initial_dist: np.ndarray  # over layer-1 states only
    transitions: np.ndarray  # (S, A, S)
    cost_mean: np.ndarray  # (S, A), in [0, 1]
    labels: tuple[str, ...] | None = None
    cost_noise: float = 0.0  # half-width of mean-preserving uniform noise

    def __post_init__(self):
        sizes = tuple(int(k) for k in self.layer_sizes)
        if not sizes or min(sizes) < 1:
            raise ValueError("need at least one layer, each with >= 1 state")
        object.__setattr__(self, "layer_sizes", sizes)
        S, A = sum(sizes), int(self.n_actions)
        if A < 1:
            raise ValueError("n_actions must be positive")
        rho = np.asarray(self.initial_dist, dtype=float)
        P = np.asarray(self.transitions, dtype=float)
        c = np.asarray(self.cost_mean, dtype=float)
        if rho.shape != (sizes[0],):
            raise ValueError(f"initial_dist must have shape ({sizes[0]},), got {rho.shape}")
        if P.shape != (S, A, S):
            raise ValueError(f"transitions must have shape {(S, A, S)}, got {P.shape}")
        if c.shape != (S, A):
            raise ValueError(f"cost_mean must have shape {(S, A)}, got {c.shape}")
        if np.any(rho < 0) or abs(rho.sum() - 1.0) > ATOL:
            raise ValueError("initial_dist must be a probability vector")
        if np.any(c < 0) or np.any(c > 1):
            raise ValueError("mean costs must lie in [0, 1]")
        if np.any(P < 0):
            raise ValueError("negative transition probability")
        if not 0.0 <= self.cost_noise <= 0.5:
            raise ValueError("cost_noise must be in [0, 0.5]")
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        for t in range(len(sizes)):
            rows = P[offsets[t] : offsets[t + 1]]
            if t == len(sizes) - 1:
                if np.any(rows != 0):
                    raise ValueError("last-layer states must be terminal")
                continue
            inside = rows[:, :, offsets[t + 1] : offsets[t + 2]].sum(axis=2)
            if np.any(np.abs(inside - 1.0) > ATOL) or np.any(np.abs(rows.sum(axis=2) - 1.0) > ATOL):
                raise ValueError(f"transitions from layer {t + 1} must be distributions on layer {t + 2}")
        if self.labels is not None:
            if len(self.labels) != S:
                raise ValueError("labels must name every state")
            object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "initial_dist", rho)
        object.__setattr__(self, "transitions", P)
        object.__setattr__(self, "cost_mean", c)
        object.__setattr__(self, "n_actions", A)

    @property
    def horizon(self) -> int:
        return len(self.layer_sizes)

    @property
    def n_states(self) -> int:
        return sum(self.layer_sizes)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.layer_sizes)]).astype(int)

    @property
    def layer_of(self) -> np.ndarray:
        """0-based layer index of every state."""
        return np.repeat(np.arange(self.horizon), self.layer_sizes)

    def layer(self, t: int) -> range:
        off = self.offsets
        return range(off[t], off[t + 1])

    @property
    def rho(self) -> np.ndarray:
        """Initial distribution padded to all states."""
        full = np.zeros(self.n_states)
        full[: self.layer_sizes[0]] = self.initial_dist
        return full

    def label(self, state: int) -> str:
        return self.labels[state] if self.labels else str(state)

    def reachable(self) -> np.ndarray:
        """Boolean mask of states reachable from rho under some action sequence."""
        mask = self.rho > 0
        for t in range(self.horizon - 1):
            src = np.zeros(self.n_states, dtype=bool)
            src[self.layer(t)] = mask[self.layer(t)]
            mask |= self.transitions[src].sum(axis=(0, 1)) > 0
        return mask


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray
    actions: np.ndarray
    costs: np.ndarray

    def __len__(self) -> int:
        return len(self.states)

    @property
    def total_cost(self) -> float:
        return float(self.costs.sum())


@dataclass(frozen=True)
class ValueTables:
    V: np.ndarray
    Q: np.ndarray
    policy_id: str | None = None


@dataclass(frozen=True)
class VisitationDistribution:
    d: np.ndarray
    per_step: np.ndarray = field(repr=False)  # (H, S): P(s_t = s)

    def by_label(self, mdp: LayeredMdp) -> dict[str, float]:
        out: dict[str, float] = {}
        for s, p in enumerate(self.d):
            out[mdp.label(s)] = out.get(mdp.label(s), 0.0) + float(p)
        return out


def policy_matrix(policy: Any, mdp: LayeredMdp) -> np.ndarray:
    probs = policy.probs if hasattr(policy, "probs") else policy
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError(f"policy shape {probs.shape} does not match mdp {(mdp.n_states, mdp.n_actions)}")
    return probs


def _checked_matrix(mdp: LayeredMdp, policy: Any) -> np.ndarray:
    probs = policy_matrix(policy, mdp)
    bad = np.isnan(probs).any(axis=1) & mdp.reachable()
    if bad.any():
        s = int(np.flatnonzero(bad)[0])
        raise PolicyUndefinedError(s, mdp.label(s) if mdp.labels else None)
    return np.nan_to_num(probs, nan=0.0)


def backward_dp(mdp: LayeredMdp, policy: Any, policy_id: str | None = None) -> ValueTables:
    """Exact V and Q of ``policy`` by backward induction over layers."""
    pi = _checked_matrix(mdp, policy)
    V = np.zeros(mdp.n_states)
    Q = np.zeros((mdp.n_states, mdp.n_actions))
    for t in reversed(range(mdp.horizon)):
        idx = mdp.layer(t)
        Q[idx] = mdp.cost_mean[idx] + mdp.transitions[idx] @ V
        V[idx] = (pi[idx] * Q[idx]).sum(axis=1)
    return ValueTables(V=V, Q=Q, policy_id=policy_id)


def optimal_policy(mdp: LayeredMdp) -> np.ndarray:
    """Cost-minimising deterministic table (lowest action index on ties)."""
    V = np.zeros(mdp.n_states)
    table = np.zeros(mdp.n_states, dtype=np.int64)
    for t in reversed(range(mdp.horizon)):
        idx = mdp.layer(t)
        Q = mdp.cost_mean[idx] + mdp.transitions[idx] @ V
        table[idx] = np.argmin(Q, axis=1)
        V[idx] = Q.min(axis=1)
    return table


def expected_cost(mdp: LayeredMdp, policy: Any) -> float:
    """J(pi) = E_{s1 ~ rho} V(s1)."""
    return float(mdp.rho @ backward_dp(mdp, policy).V)


def forward_visitation(mdp: LayeredMdp, policy: Any) -> VisitationDistribution:
    pi = _checked_matrix(mdp, policy)
    per_step = np.zeros((mdp.horizon, mdp.n_states))
    per_step[0] = mdp.rho
    # state-to-state kernel under pi
    kernel = np.einsum("sa,sat->st", pi, mdp.transitions)
    for t in range(1, mdp.horizon):
        per_step[t] = per_step[t - 1] @ kernel
    return VisitationDistribution(d=per_step.mean(axis=0), per_step=per_step)


def _sample_rows(cdf: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(len(cdf))
    idx = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(idx, cdf.shape[1] - 1)


def simulate(
    mdp: LayeredMdp, policy: Any, n: int, rng: np.random.Generator, steps: int | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Roll out ``n`` independent episodes for ``steps`` (default H) steps.

    Returns ``(states, actions, costs)``, each of shape ``(n, steps)``.
    """
    steps = mdp.horizon if steps is None else steps
    pi_cdf = np.cumsum(_checked_matrix(mdp, policy), axis=1)
    P_cdf = np.cumsum(mdp.transitions, axis=2)
    rho_cdf = np.cumsum(mdp.initial_dist)
    states = np.zeros((n, steps), dtype=np.int64)
    actions = np.zeros((n, steps), dtype=np.int64)
    costs = np.zeros((n, steps))
    s = _sample_rows(np.broadcast_to(rho_cdf, (n, len(rho_cdf))), rng)
    for t in range(steps):
        a = _sample_rows(pi_cdf[s], rng)
        states[:, t], actions[:, t] = s, a
        c = mdp.cost_mean[s, a]
        if mdp.cost_noise > 0:
            half = np.minimum(mdp.cost_noise, np.minimum(c, 1.0 - c))
            c = c + half * rng.uniform(-1.0, 1.0, size=n)
        costs[:, t] = c
        if t + 1 < steps:
            s = _sample_rows(P_cdf[s, a], rng)
    return states, actions, costs


def rollout(mdp: LayeredMdp, policy: Any, rng: np.random.Generator) -> Trajectory:
    states, actions, costs = simulate(mdp, policy, 1, rng)
    return Trajectory(states[0], actions[0], costs[0])


def sample_visitation_states(
    mdp: LayeredMdp, policy: Any, K: int, rng: np.random.Generator, mode: str = "iid"
) -> np.ndarray:
    """Draw K states from d_pi.

    ``iid``: one independent rollout per state, truncated at a uniformly drawn
    timestep. ``slice``: consecutive states of ceil(K/H) full rollouts.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    H = mdp.horizon
    if mode == "iid":
        t = rng.integers(0, H, size=K)
        states, _, _ = simulate(mdp, policy, K, rng, steps=int(t.max()) + 1)
        return states[np.arange(K), t]
    if mode == "slice":
        n = -(-K // H)
        states, _, _ = simulate(mdp, policy, n, rng)
        return states.reshape(-1)[:K]
    raise ValueError(f"unknown sampling mode {mode!r}")


def performance_difference(mdp: LayeredMdp, policy: Any, reference: Any) -> tuple[float, float]:
    """Both sides of J(pi) - J(ref) = H E_{s~d_pi, a~pi}[Q_ref(s,a) - V_ref(s)]."""
    pi = _checked_matrix(mdp, policy)
    ref = backward_dp(mdp, reference)
    lhs = expected_cost(mdp, policy) - float(mdp.rho @ ref.V)
    d = forward_visitation(mdp, policy).d
    advantage = ref.Q - ref.V[:, None]
    rhs = mdp.horizon * float(d @ (pi * advantage).sum(axis=1))
    return lhs, rhs


# ---------------------------------------------------------------- builders


def random_mdp(
    horizon: int,
    width: int | Sequence[int],
    n_actions: int,
    rng: np.random.Generator,
    concentration: float = 1.0,
    support: int | None = None,
) -> LayeredMdp:
    """Dirichlet transitions, uniform [0,1] mean costs.

    ``support`` limits each transition row to that many next states.
    """
    sizes = [width] * horizon if isinstance(width, int) else list(width)
    if len(sizes) != horizon:
        raise ValueError("need one width per layer")
    S = sum(sizes)
    off = np.concatenate([[0], np.cumsum(sizes)])
    P = np.zeros((S, n_actions, S))
    for t in range(horizon - 1):
        nxt = sizes[t + 1]
        k = nxt if support is None else min(support, nxt)
        for s in range(off[t], off[t + 1]):
            for a in range(n_actions):
                cols = rng.choice(nxt, size=k, replace=False)
                P[s, a, off[t + 1] + cols] = rng.dirichlet(np.full(k, concentration))
    rho = rng.dirichlet(np.full(sizes[0], concentration))
    cost = rng.random((S, n_actions))
    return _normalized(sizes, n_actions, rho, P, cost)


def _normalized(sizes, n_actions, rho, P, cost, labels=None, cost_noise=0.0) -> LayeredMdp:
    # exact renormalisation keeps row sums within ATOL after float arithmetic
    rho = rho / rho.sum()
    sums = P.sum(axis=2, keepdims=True)
    P = np.divide(P, sums, out=np.zeros_like(P), where=sums > 0)
    return LayeredMdp(tuple(sizes), n_actions, rho, P, cost, labels, cost_noise)


def chain_mdp(horizon: int, n_actions: int = 2, width: int = 1) -> LayeredMdp:
    """Deterministic chain; action ``a`` at slot ``i`` moves to slot ``(i + a) % width``.

    Action 0 is free, every other action costs 1/H.
    """
    sizes = [width] * horizon
    S = width * horizon
    P = np.zeros((S, n_actions, S))
    for t in range(horizon - 1):
        for i in range(width):
            for a in range(n_actions):
                P[t * width + i, a, (t + 1) * width + (i + a) % width] = 1.0
    cost = np.full((S, n_actions), 1.0 / horizon)
    cost[:, 0] = 0.0
    rho = np.zeros(width)
    rho[0] = 1.0
    labels = tuple(f"c{i}@{t + 1}" for t in range(horizon) for i in range(width))
    return LayeredMdp(tuple(sizes), n_actions, rho, P, cost, labels)


L, R = 0, 1


def counterexample_mdp(horizon: int) -> LayeredMdp:
    """Five-state ski MDP where the no-regret sequence is globally suboptimal.

    S0 -L-> S1 (absorbing, cost 1/H per step); S0 -R-> S2; S2 -L-> S3
    (absorbing, free); S2 -R-> S4 (absorbing, cost 1 per step). The absorbing
    states are unrolled into one copy per layer; ``labels`` carry the names.
    """
    H = horizon
    if H < 3:
        raise ValueError("counterexample needs H >= 3")
    names: list[str] = ["S0", "S1", "S2"] + ["S1", "S3", "S4"] * (H - 2)
    sizes = [1, 2] + [3] * (H - 2)
    S = len(names)
    off = np.concatenate([[0], np.cumsum(sizes)])

    def at(name: str, t: int) -> int:
        for s in range(off[t], off[t + 1]):
            if names[s] == name:
                return s
        raise KeyError((name, t))

    P = np.zeros((S, 2, S))
    cost = np.zeros((S, 2))
    P[at("S0", 0), L, at("S1", 1)] = 1.0
    P[at("S0", 0), R, at("S2", 1)] = 1.0
    cost[at("S0", 0)] = [1.0 / H, 0.0]
    s2 = at("S2", 1)
    cost[s2] = [0.0, 1.0]
    if H > 2:
        P[s2, L, at("S3", 2)] = 1.0
        P[s2, R, at("S4", 2)] = 1.0
    for t in range(1, H):
        for name, c in (("S1", 1.0 / H), ("S3", 0.0), ("S4", 1.0)):
            if name != "S1" and t == 1:
                continue
            s = at(name, t)
            cost[s] = c
            if t + 1 < H:
                P[s, :, at(name, t + 1)] = 1.0
    return LayeredMdp(tuple(sizes), 2, np.array([1.0]), P, cost, tuple(names))


def fork_mdp(horizon: int, slip: float = 0.1) -> LayeredMdp:
    """Two-branch task where each branch punishes the policy that chose it.

    The root action picks branch A (action 0) or B (action 1); with
    probability ``slip`` the other branch is entered, and every in-branch step
    also switches branch with probability ``slip``. Unit cost whenever the
    action differs from the expert (root: 0, branch A: 1, branch B: 0).
    """
    if horizon < 2 or not 0.0 <= slip < 0.5:
        raise ValueError("fork needs H >= 2 and slip in [0, 0.5)")
    sizes = [1] + [2] * (horizon - 1)
    S = sum(sizes)
    labels = ["root"] + [f"{b}@{t + 1}" for t in range(1, horizon) for b in "AB"]
    P = np.zeros((S, 2, S))
    P[0, 0, [1, 2]] = [1 - slip, slip]
    P[0, 1, [1, 2]] = [slip, 1 - slip]
    for t in range(1, horizon - 1):
        a_t, b_t = 1 + 2 * (t - 1), 2 + 2 * (t - 1)
        for src, stay, move in ((a_t, a_t + 2, b_t + 2), (b_t, b_t + 2, a_t + 2)):
            P[src, :, stay] = 1 - slip
            P[src, :, move] = slip
    expert = fork_expert_table(horizon)
    cost = np.ones((S, 2))
    cost[np.arange(S), expert] = 0.0
    return LayeredMdp(tuple(sizes), 2, np.array([1.0]), P, cost, tuple(labels))


def fork_expert_table(horizon: int) -> np.ndarray:
    table = np.zeros(1 + 2 * (horizon - 1), dtype=np.int64)
    table[1::2] = 1  # branch A states
    return table


# ------------------------------------------------------------ serialization


def mdp_to_dict(mdp: LayeredMdp) -> dict[str, Any]:
    return {
        "horizon": mdp.horizon,
        "layer_sizes": list(mdp.layer_sizes),
        "n_actions": mdp.n_actions,
        "initial_dist": mdp.initial_dist.tolist(),
        "transitions": mdp.transitions.tolist(),
        "cost_mean": mdp.cost_mean.tolist(),
        "labels": list(mdp.labels) if mdp.labels else None,
        "cost_noise": mdp.cost_noise,
    }


def mdp_from_dict(doc: dict[str, Any]) -> LayeredMdp:
    sizes = tuple(doc["layer_sizes"])
    if doc.get("horizon", len(sizes)) != len(sizes):
        raise ValueError("horizon does not match layer_sizes")
    return LayeredMdp(
        sizes,
        doc["n_actions"],
        np.array(doc["initial_dist"], dtype=float),
        np.array(doc["transitions"], dtype=float),
        np.array(doc["cost_mean"], dtype=float),
        tuple(doc["labels"]) if doc.get("labels") else None,
        float(doc.get("cost_noise", 0.0)),
    )


def save_mdp(mdp: LayeredMdp, path: str | Path, **extra: Any) -> None:
    """Write ``mdp`` (plus optional extra sections, e.g. a policy class) as JSON."""
    doc = {"mdp": mdp_to_dict(mdp), **extra}
    Path(path).write_text(json.dumps(doc, indent=1))


def load_mdp(path: str | Path) -> tuple[LayeredMdp, dict[str, Any]]:
    doc = json.loads(Path(path).read_text())
    mdp = mdp_from_dict(doc.pop("mdp"))
    return mdp, doc
