"""Inference-step benchmark sweep and CSV reporting."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..policy.model import PolicyModel
from ..rng import RngStream
from .rollout import eval_traj_error, rollout

__all__ = ["EvalReport", "bench_steps", "bench_traj_steps", "DEFAULT_STEPS"]

DEFAULT_STEPS = (1, 2, 4, 8, 16)

CSV_HEADER = "task,policy,steps,seed,metric,latency_ms_mean,latency_ms_p95"


@dataclass
class EvalReport:
    """Per-step-count benchmark rows, ordered by condition index."""

    rows: list = field(default_factory=list)

    def add_row(self, task: str, policy: str, steps: int, seed: int, metric: float, latencies_ms):
        lat = np.asarray(latencies_ms, dtype=np.float64)
        if lat.size == 0 or np.any(lat <= 0):
            raise ValueError("latency samples must be positive and non-empty")
        self.rows.append(
            {
                "task": task,
                "policy": policy,
                "steps": int(steps),
                "seed": int(seed),
                "metric": float(metric),
                "latency_ms_mean": float(lat.mean()),
                "latency_ms_p50": float(np.percentile(lat, 50)),
                "latency_ms_p95": float(np.percentile(lat, 95)),
            }
        )

    def metric_for(self, steps: int, policy: str | None = None) -> float:
        for r in self.rows:
            if r["steps"] == steps and (policy is None or r["policy"] == policy):
                return r["metric"]
        raise KeyError(f"no row for steps={steps}, policy={policy}")

    def to_csv(self, path) -> None:
        lines = [CSV_HEADER]
        for r in self.rows:
            lines.append(
                f'{r["task"]},{r["policy"]},{r["steps"]},{r["seed"]},'
                f'{r["metric"]:.6f},{r["latency_ms_mean"]:.4f},{r["latency_ms_p95"]:.4f}'
            )
        Path(path).write_text("\n".join(lines) + "\n")


def _check_steps(model: PolicyModel, steps_list):
    steps_list = [int(s) for s in steps_list]
    for s in steps_list:
        if s < 1:
            raise ValueError(f"inference steps must be >= 1, got {s}")
        if model.schedule is not None and s > model.schedule.num_train_steps:
            raise ValueError(f"steps {s} exceeds schedule length {model.schedule.num_train_steps}")
    return steps_list


def bench_steps(
    model: PolicyModel,
    env,
    steps_list,
    n_conditions: int,
    n_replications: int,
    seed: int,
    task: str = "pusht",
    steps_budget: int = 300,
    ta: int = 8,
) -> EvalReport:
    """Closed-loop sweep: mean coverage per step count over fresh env resets.

    Condition initializations are drawn from one stream so every step count
    sees the same set of initial states.
    """
    steps_list = _check_steps(model, steps_list)
    root = RngStream(seed)
    init_states = []
    init_stream = root.child(0)
    for _ in range(n_conditions):
        init_states.append(env.reset(init_stream))

    report = EvalReport()
    for si, steps in enumerate(steps_list):
        metrics, latencies = [], []
        for ci, state in enumerate(init_states):
            for rep in range(n_replications):
                env.set_state(state)
                res = rollout(
                    model, env, steps_budget, steps,
                    root.child(1 + si * n_conditions * n_replications + ci * n_replications + rep),
                    ta=ta,
                )
                metrics.append(res.metric)
                latencies.extend(res.latencies_ms)
        report.add_row(task, model.kind, steps, seed, float(np.mean(metrics)), latencies)
    return report


def bench_traj_steps(
    model: PolicyModel,
    holdout_samples,
    steps_list,
    seed: int,
    task: str,
    references=None,
    max_samples: int | None = None,
    reps: int = 1,
) -> EvalReport:
    """Open-loop sweep: mean trajectory error per step count.

    Every step count is evaluated with an identically seeded stream
    (common random numbers), so the comparison across step counts is not
    confounded by different initial-noise draws.
    """
    steps_list = _check_steps(model, steps_list)
    if max_samples is not None:
        holdout_samples = holdout_samples[:max_samples]
    samples = list(holdout_samples) * reps
    report = EvalReport()
    for steps in steps_list:
        err, latencies = eval_traj_error(
            model, samples, steps, RngStream(seed).child(0), references=references
        )
        report.add_row(task, model.kind, steps, seed, err, latencies)
    return report
