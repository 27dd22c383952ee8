from .rollout import RolloutResult, eval_traj_error, measure_latency, rollout
from .sweep import DEFAULT_STEPS, EvalReport, bench_steps, bench_traj_steps
from .train import TrainConfig, TrainingDiverged, train, write_loss_csv

__all__ = [
    "TrainConfig",
    "TrainingDiverged",
    "train",
    "write_loss_csv",
    "RolloutResult",
    "rollout",
    "eval_traj_error",
    "measure_latency",
    "EvalReport",
    "bench_steps",
    "bench_traj_steps",
    "DEFAULT_STEPS",
]
