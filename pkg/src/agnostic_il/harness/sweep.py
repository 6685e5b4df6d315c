"""Multi-seed sweeps with per-round evaluation and deterministic CSV/JSON output.

results.csv columns, one row per (algo, seed, round), ordered by algorithm
as configured, then seed, then round:

    algo            algorithm label (e.g. ``MP-25(poi100)``)
    seed            run seed
    round           n, 1-based
    expert_queries  cumulative annotations after round n (n * K)
    eval_mean       mean episode value of the evaluated policy
    eval_is_cost    1 when eval_mean is a cost (lower is better)
    reg_cum         Reg(n) of the played sequence pi_1..pi_n
    estgap          mu H Reg(n) / n (nan when mu is unknown)
    wall_ms         round wall time, 0 unless output.wall_time is set
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import re
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from agnostic_il import seeding
from agnostic_il.algorithms import RunHistory, TabularProblem, run
from agnostic_il.analysis import analysis_rows, empirical_regret_curve, history_ledger
from agnostic_il.harness.build import Setup, build_problem
from agnostic_il.harness.config import ExperimentConfig, config_to_dict
from agnostic_il.harness.evaluation import EvalSummary, evaluate_mixture, evaluate_policy, summarize
from agnostic_il.mdp import expected_cost

RESULT_COLUMNS = (
    "algo", "seed", "round", "expert_queries", "eval_mean", "eval_is_cost", "reg_cum", "estgap", "wall_ms",
)
ANALYSIS_COLUMNS = (
    "algo", "seed", "round", "expert_queries", "J_exact_or_MC", "Fn_pi_n", "reg_cum", "estgap", "mu",
    "sigma_inv_est",
)


@dataclass
class RunResult:
    algo: str
    seed: int
    history: RunHistory | None = None
    rows: list[dict[str, Any]] = field(default_factory=list)
    analysis: list[dict[str, Any]] = field(default_factory=list)
    error: str | None = None


@dataclass
class SweepResult:
    config: ExperimentConfig
    seeds: tuple[int, ...]
    runs: list[RunResult]
    summaries: list[EvalSummary]

    @property
    def failures(self) -> list[RunResult]:
        return [r for r in self.runs if r.error is not None]


def _evaluate_rounds(setup: Setup, config: ExperimentConfig, history: RunHistory, seed: int) -> list[float]:
    ev = config.eval
    problem = setup.problem
    env = problem.mdp if isinstance(problem, TabularProblem) else problem.env
    out = []
    for n in range(1, history.n_rounds + 1):
        rng = seeding.derive_rng(ev.seed, seed, n, seeding.EVAL)
        if ev.returned == "final":
            pi = history.returned_policy(n)
            if ev.mode == "exact":
                out.append(expected_cost(env, pi))
            else:
                out.append(evaluate_policy(env, pi, ev.episodes, rng)[0])
        else:
            played = history.policies[:n]
            if ev.mode == "exact":
                out.append(float(np.mean([expected_cost(env, pi) for pi in played])))
            else:
                out.append(evaluate_mixture(env, played, ev.episodes, rng)[0])
    return out


def _continuous_analysis(setup: Setup, config: ExperimentConfig, history: RunHistory, seed: int):
    problem = setup.problem
    loss = history.config.loss
    played, curve = empirical_regret_curve(history, problem.fit, loss)
    rows = []
    for i, rec in enumerate(history.rounds):
        rng = seeding.derive_rng(config.eval.seed, seed, rec.round, seeding.EVAL, "played")
        J = evaluate_policy(problem.env, history.policy(rec.round), config.eval.episodes, rng)[0]
        rows.append({
            "algo": history.config.label, "seed": seed, "round": rec.round,
            "expert_queries": rec.expert_queries, "J_exact_or_MC": J, "Fn_pi_n": float(played[i]),
            "reg_cum": float(curve[i]), "estgap": math.nan, "mu": math.nan, "sigma_inv_est": setup.sigma_inv,
        })
    return rows


def run_one(setup: Setup, config: ExperimentConfig, algo_index: int, seed: int) -> RunResult:
    algo = dataclasses.replace(config.algorithms[algo_index], seed=seed)
    result = RunResult(algo.label, seed)
    try:
        history = run(setup.problem, algo)
        evals = _evaluate_rounds(setup, config, history, seed)
        if isinstance(setup.problem, TabularProblem):
            analysis = analysis_rows(setup.problem, history, seed, setup.mu, setup.sigma_inv)
        else:
            analysis = _continuous_analysis(setup, config, history, seed)
    except Exception:  # isolate the run, keep the sweep going
        result.error = traceback.format_exc(limit=3)
        return result
    result.history = history
    result.analysis = analysis
    for rec, value, arow in zip(history.rounds, evals, analysis):
        result.rows.append({
            "algo": algo.label,
            "seed": seed,
            "round": rec.round,
            "expert_queries": rec.expert_queries,
            "eval_mean": value,
            "eval_is_cost": 1,
            "reg_cum": arow["reg_cum"],
            "estgap": arow["estgap"],
            "wall_ms": rec.wall_ms if config.output.wall_time else 0.0,
        })
    return result


def _summaries(config: ExperimentConfig, runs: list[RunResult]) -> list[EvalSummary]:
    by_key: dict[tuple[str, int], list[float]] = {}
    order: list[tuple[str, int]] = []
    for r in runs:
        for row in r.rows:
            key = (row["algo"], row["round"])
            if key not in by_key:
                by_key[key] = []
                order.append(key)
            by_key[key].append(row["eval_mean"])
    ev = config.eval
    return [
        summarize(algo, n, by_key[(algo, n)], ev.quantiles, ev.bootstrap_resamples,
                  seeding.derive_rng(ev.seed, n, seeding.AGGREGATE, algo))
        for algo, n in order
    ]


def run_sweep(config: ExperimentConfig, seeds=None, out: str | Path | None = None) -> SweepResult:
    seeds = tuple(config.seeds if seeds is None else seeds)
    if not seeds:
        raise ValueError("seeds must be nonempty")
    setup = build_problem(config)
    runs = [run_one(setup, config, i, s) for i in range(len(config.algorithms)) for s in seeds]
    result = SweepResult(config, seeds, runs, _summaries(config, runs))
    if out is not None:
        write_outputs(result, Path(out))
    return result


# ------------------------------------------------------------------- output


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, columns: tuple[str, ...], rows: list[dict[str, Any]]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row[c]) for c in columns])


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", text).strip("_")


def write_outputs(result: SweepResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "results.csv", RESULT_COLUMNS, [row for r in result.runs for row in r.rows])
    write_csv(out / "analysis.csv", ANALYSIS_COLUMNS, [row for r in result.runs for row in r.analysis])
    summary = {
        "config": config_to_dict(result.config),
        "seeds": list(result.seeds),
        "summary": [s.to_dict() for s in result.summaries],
        "failures": [{"algo": r.algo, "seed": r.seed, "error": r.error} for r in result.failures],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if result.config.output.histories:
        hdir = out / "histories"
        hdir.mkdir(exist_ok=True)
        for r in result.runs:
            if r.history is None:
                continue
            doc = r.history.to_dict()
            if not result.config.output.wall_time:
                for rec in doc["rounds"]:
                    rec["wall_ms"] = 0.0
            (hdir / f"{_slug(r.algo)}_seed{r.seed}.json").write_text(json.dumps(doc) + "\n")


def read_results(path: str | Path) -> list[dict[str, Any]]:
    path = Path(path)
    if path.is_dir():
        path = path / "results.csv"
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for key in ("seed", "round", "expert_queries", "eval_is_cost"):
            row[key] = int(row[key])
        for key in ("eval_mean", "reg_cum", "estgap", "wall_ms"):
            row[key] = float(row[key])
    return rows
