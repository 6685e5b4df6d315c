"""Configuration, sweeps, evaluation and the command-line interface."""

from agnostic_il.harness.config import ExperimentConfig, load_config
from agnostic_il.harness.evaluation import EvalSummary, bootstrap_ci, evaluate_policy
from agnostic_il.harness.sweep import run_sweep

__all__ = ["EvalSummary", "ExperimentConfig", "bootstrap_ci", "evaluate_policy", "load_config", "run_sweep"]
