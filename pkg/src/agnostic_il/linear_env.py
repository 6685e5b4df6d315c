"""Small continuous tracking task with linear dynamics (simulation only)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from agnostic_il.policies import TanhPolicy


@dataclass(frozen=True, eq=False)
class LinearEnv:
    """x' = clip(F x + G u + noise, -box, box); cost = min(1, |x|^2 / cost_scale)."""

    dynamics: np.ndarray  # (ds, ds)
    control: np.ndarray  # (ds, da)
    horizon: int
    noise_scale: float = 0.05
    box: float = 2.0
    init_scale: float = 1.0
    cost_scale: float = 4.0

    @property
    def state_dim(self) -> int:
        return self.dynamics.shape[0]

    @property
    def action_dim(self) -> int:
        return self.control.shape[1]

    def reset(self, n: int, rng: np.random.Generator) -> np.ndarray:
        x = self.init_scale * rng.standard_normal((n, self.state_dim))
        return np.clip(x, -self.box, self.box)

    def cost(self, states: np.ndarray) -> np.ndarray:
        return np.minimum(1.0, (states**2).sum(axis=-1) / self.cost_scale)

    def step(self, states: np.ndarray, actions: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        actions = np.clip(actions, -1.0, 1.0)
        nxt = states @ self.dynamics.T + actions @ self.control.T
        nxt = nxt + self.noise_scale * rng.standard_normal(nxt.shape)
        return np.clip(nxt, -self.box, self.box)

    def simulate(self, policy, n: int, rng: np.random.Generator, steps: int | None = None):
        steps = self.horizon if steps is None else steps
        states = np.zeros((n, steps, self.state_dim))
        actions = np.zeros((n, steps, self.action_dim))
        costs = np.zeros((n, steps))
        x = self.reset(n, rng)
        for t in range(steps):
            u = np.clip(np.atleast_2d(policy.act(x)), -1.0, 1.0)
            states[:, t], actions[:, t], costs[:, t] = x, u, self.cost(x)
            if t + 1 < steps:
                x = self.step(x, u, rng)
        return states, actions, costs

    def sample_visitation_states(self, policy, K: int, rng: np.random.Generator, mode: str = "iid") -> np.ndarray:
        H = self.horizon
        if mode == "iid":
            t = rng.integers(0, H, size=K)
            states, _, _ = self.simulate(policy, K, rng, steps=int(t.max()) + 1)
            return states[np.arange(K), t]
        if mode == "slice":
            n = -(-K // H)
            states, _, _ = self.simulate(policy, n, rng)
            return states.reshape(-1, self.state_dim)[:K]
        raise ValueError(f"unknown sampling mode {mode!r}")

    def uniform_states(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-self.box, self.box, size=(n, self.state_dim))


def linear_tracking_env(
    state_dim: int, action_dim: int, horizon: int, rng: np.random.Generator, noise_scale: float = 0.05
) -> tuple[LinearEnv, TanhPolicy]:
    """Random mildly unstable system and a saturating stabilising expert."""
    F = rng.standard_normal((state_dim, state_dim))
    F *= 1.05 / max(abs(np.linalg.eigvals(F)))
    G = rng.standard_normal((state_dim, action_dim))
    gain = np.linalg.pinv(G) @ (0.3 * np.eye(state_dim) - F)
    env = LinearEnv(F, G, horizon, noise_scale=noise_scale)
    return env, TanhPolicy(1.5 * gain)
