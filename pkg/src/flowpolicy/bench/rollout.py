"""Closed-loop receding-horizon evaluation and trajectory-error scoring."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..policy.model import PolicyModel
from ..rng import RngStream

__all__ = ["RolloutResult", "rollout", "eval_traj_error", "measure_latency"]


@dataclass
class RolloutResult:
    metric: float
    latencies_ms: list = field(default_factory=list)
    model_calls: int = 0
    env_steps: int = 0


def rollout(
    model: PolicyModel,
    env,
    steps_budget: int,
    inference_steps: int,
    stream: RngStream,
    ta: int = 8,
) -> RolloutResult:
    """Receding horizon: sample a Tp-step plan, execute the first Ta actions.

    The environment must already be reset; its final task metric is taken
    from env.coverage().  Per-sample latency covers only the model call.
    """
    if not 1 <= ta <= model.tp:
        raise ValueError(f"need 1 <= Ta <= Tp, got Ta={ta}, Tp={model.tp}")
    if steps_budget < 1:
        raise ValueError(f"steps budget must be >= 1, got {steps_budget}")
    latencies = []
    calls = 0
    done = 0
    while done < steps_budget:
        obs = env.observation()
        t0 = time.perf_counter()
        plan = model.sample(obs, inference_steps, stream)[0]  # (Tp, ActD)
        latencies.append((time.perf_counter() - t0) * 1e3)
        calls += 1
        for waypoint in plan[: min(ta, steps_budget - done)]:
            env.step(waypoint)
            done += 1
    return RolloutResult(metric=env.coverage(), latencies_ms=latencies, model_calls=calls, env_steps=done)


def eval_traj_error(
    model: PolicyModel,
    samples,
    inference_steps: int,
    stream: RngStream,
    references=None,
    max_samples: int | None = None,
) -> tuple:
    """Mean nearest-reference trajectory error over (obs, traj) pairs.

    For each holdout pair the model draws one conditioned trajectory; the
    error is the mean per-waypoint Euclidean distance to the closest
    reference (the pair's own demonstration unless shared mode references
    are supplied).  Returns (mean_error, per-sample latencies in ms).
    """
    if max_samples is not None:
        samples = samples[:max_samples]
    if not samples:
        raise ValueError("no samples to evaluate")
    errors = []
    latencies = []
    for obs, traj in samples:
        t0 = time.perf_counter()
        pred = model.sample(obs, inference_steps, stream)[0]
        latencies.append((time.perf_counter() - t0) * 1e3)
        refs = references if references is not None else [traj]
        err = min(float(np.mean(np.linalg.norm(pred - np.asarray(r), axis=1))) for r in refs)
        errors.append(err)
    return float(np.mean(errors)), latencies


def measure_latency(model: PolicyModel, obs, inference_steps: int, stream: RngStream, repeats: int = 5):
    """Isolated sequential wall-clock per sample: one warm-up, then timed runs."""
    model.sample(obs, inference_steps, stream)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        model.sample(obs, inference_steps, stream)
        times.append((time.perf_counter() - t0) * 1e3)
    return float(np.median(times)), times
