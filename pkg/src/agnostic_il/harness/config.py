"""Experiment configuration: nested dataclasses loaded from YAML.

Unknown keys are rejected at every level so that typos fail fast.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from agnostic_il.algorithms import AlgoConfig

ENV_KINDS = ("tabular-random", "counterexample", "chain", "fork", "linear-tracking")
EXPERT_KINDS = ("optimal", "random", "designed", "tanh")
CLASS_KINDS = ("corruptions", "random", "constant", "designed", "linear")
D0_KINDS = ("none", "uniform-over-states", "exact-mixture", "state-pool")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EnvSpec:
    kind: str = "tabular-random"
    horizon: int = 5
    width: int = 3
    n_actions: int = 2
    support: int | None = None
    slip: float = 0.1
    state_dim: int = 4
    action_dim: int = 2
    noise: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ENV_KINDS:
            raise ConfigError(f"env.kind must be one of {ENV_KINDS}")
        if self.horizon < 1:
            raise ConfigError("env.horizon must be >= 1")

    @property
    def continuous(self) -> bool:
        return self.kind == "linear-tracking"


@dataclass(frozen=True)
class ExpertSpec:
    kind: str = "optimal"
    corruptions: int = 1  # states on which class members deviate from the expert
    noise_scale: float = 0.0

    def __post_init__(self):
        if self.kind not in EXPERT_KINDS:
            raise ConfigError(f"expert.kind must be one of {EXPERT_KINDS}")


@dataclass(frozen=True)
class ClassSpec:
    kind: str = "corruptions"
    size: int = 8
    include_expert: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.kind not in CLASS_KINDS:
            raise ConfigError(f"policy_class.kind must be one of {CLASS_KINDS}")
        if self.size < 1:
            raise ConfigError("policy_class.size must be >= 1")


@dataclass(frozen=True)
class D0Spec:
    kind: str = "none"
    pool_runs: int = 10  # DAgger runs feeding a state pool
    pool_rounds: int = 10
    box: float = 2.0

    def __post_init__(self):
        if self.kind not in D0_KINDS:
            raise ConfigError(f"d0.kind must be one of {D0_KINDS}")


@dataclass(frozen=True)
class EvalSpec:
    episodes: int = 25
    seed: int = 0
    mode: str = "rollout"  # or "exact" (tabular only)
    returned: str = "final"  # or "uniform" (mixture over rounds so far)
    bootstrap_resamples: int = 1000
    quantiles: tuple[float, ...] = (0.1, 0.9)

    def __post_init__(self):
        if self.episodes < 1:
            raise ConfigError("eval.episodes must be >= 1")
        if self.mode not in ("rollout", "exact"):
            raise ConfigError("eval.mode must be rollout or exact")
        if self.returned not in ("final", "uniform"):
            raise ConfigError("eval.returned must be final or uniform")
        if self.bootstrap_resamples < 1000:
            raise ConfigError("eval.bootstrap_resamples must be >= 1000")
        object.__setattr__(self, "quantiles", tuple(float(q) for q in self.quantiles))


@dataclass(frozen=True)
class OutputSpec:
    wall_time: bool = False  # nonzero wall_ms breaks byte-identical reruns
    histories: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvSpec = field(default_factory=EnvSpec)
    expert: ExpertSpec = field(default_factory=ExpertSpec)
    policy_class: ClassSpec = field(default_factory=ClassSpec)
    algorithms: tuple[AlgoConfig, ...] = ()
    d0: D0Spec = field(default_factory=D0Spec)
    eval: EvalSpec = field(default_factory=EvalSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    seeds: tuple[int, ...] = (0,)

    def __post_init__(self):
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        needs_d0 = any(a.algorithm == "mftpl-p" for a in self.algorithms)
        if needs_d0 and self.d0.kind == "none":
            raise ConfigError("mftpl-p needs a d0 section")
        discrete_loss = [a.loss == "zero-one" for a in self.algorithms]
        if self.env.continuous and any(discrete_loss):
            raise ConfigError("continuous environments need a clipped-mse or absolute loss")
        if not self.env.continuous and not all(discrete_loss):
            raise ConfigError("tabular environments use the zero-one loss")
        labels = [a.label for a in self.algorithms]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"algorithm labels must be unique, got {labels}")


_SECTIONS = {
    "env": EnvSpec,
    "expert": ExpertSpec,
    "policy_class": ClassSpec,
    "d0": D0Spec,
    "eval": EvalSpec,
    "output": OutputSpec,
}


def _build(cls, data: Any, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: dict[str, Any]) -> ExperimentConfig:
    top = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(data) - top)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    kwargs: dict[str, Any] = {k: _build(cls, data.get(k), k) for k, cls in _SECTIONS.items()}
    algos = data.get("algorithms") or []
    kwargs["algorithms"] = tuple(_build(AlgoConfig, a, f"algorithms[{i}]") for i, a in enumerate(algos))
    if "seeds" in data:
        kwargs["seeds"] = tuple(int(s) for s in data["seeds"])
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(config: ExperimentConfig) -> dict[str, Any]:
    doc = dataclasses.asdict(config)
    doc["seeds"] = list(config.seeds)
    doc["eval"]["quantiles"] = list(config.eval.quantiles)
    return doc


def load_config(path: str | Path) -> ExperimentConfig:
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return config_from_dict(data)


def parse_seed_range(text: str) -> tuple[int, ...]:
    """``1..10`` (inclusive) or a comma list ``1,2,5``."""
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
        if hi < lo:
            raise ConfigError(f"empty seed range {text!r}")
        return tuple(range(lo, hi + 1))
    return tuple(int(s) for s in text.split(",") if s.strip())
