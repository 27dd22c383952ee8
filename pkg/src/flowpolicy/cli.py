"""Command-line interface: gen-data, train, eval, bench, plot-data."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bench import TrainConfig, bench_steps, bench_traj_steps, train, write_loss_csv
from .envs import DemoDataset, PushTConfig, PushTEnv, gen_affordance, gen_bimodal, gen_pusht
from .persist import CheckpointError, ConfigError, load_checkpoint, load_config, setup_logging
from .policy.normalizer import UnfittedError
from .rng import RngStream

__all__ = ["main"]

log = logging.getLogger("flowpolicy.cli")

TASKS = ("bimodal", "pusht", "affordance")

# keys accepted in `key = value` config files; flags override these
CONFIG_SCHEMA = {
    "epochs": int,
    "batch_size": int,
    "lr": float,
    "lr_final": float,
    "weight_decay": float,
    "tp": int,
    "ta": int,
    "diffusion_k": int,
    "checkpoint_every": int,
    "holdout_fraction": float,
    "channels": tuple,
    "groups": int,
    "time_embed_dim": int,
    "n": int,
    "p_left": float,
    "n_distractors": int,
    "n_conditions": int,
    "n_replications": int,
    "steps_budget": int,
    "stop_coverage": float,
    "noise": float,
    "dwell": int,
    "eval_samples": int,
}


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flowpolicy", description="Generative action-policy benchmark toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, policy=False, steps=False, epochs=False, data=False, model=False):
        sp.add_argument("--task", choices=TASKS, required=True)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--config", type=Path, default=None, help="key = value config file")
        sp.add_argument("--out", type=Path, required=True, help="output directory")
        if policy:
            sp.add_argument("--policy", choices=("fm", "ddpm", "ddim"), required=True)
        if steps:
            sp.add_argument("--steps", default="1,2,4,8,16", help="inference step count(s), comma-separated")
        if epochs:
            sp.add_argument("--epochs", type=int, default=None)
        if data:
            sp.add_argument("--data", type=Path, required=True, help="FMDS dataset file")
        if model:
            sp.add_argument("--model", type=Path, required=True, help="FMCK checkpoint file")

    sp = sub.add_parser("gen-data", help="generate a demonstration dataset")
    common(sp)
    sp.add_argument("--n", type=int, default=None, help="number of demos/episodes")

    sp = sub.add_parser("train", help="train a policy on a dataset")
    common(sp, policy=True, epochs=True, data=True)

    sp = sub.add_parser("eval", help="evaluate a checkpoint at one step count")
    common(sp, policy=True, steps=True, data=True, model=True)

    sp = sub.add_parser("bench", help="inference-step sweep with latency")
    common(sp, policy=True, steps=True, data=True, model=True)

    sp = sub.add_parser("plot-data", help="render figures for CSVs in --out")
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--data", type=Path, default=None, help="optional FMDS file to visualize")
    return p


def _load_cfg(args) -> dict:
    cfg = {}
    if getattr(args, "config", None) is not None:
        cfg = load_config(args.config, CONFIG_SCHEMA)
    return cfg


def _parse_steps(text: str) -> list:
    try:
        steps = [int(s) for s in str(text).split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"--steps must be comma-separated integers, got {text!r}") from exc
    if not steps:
        raise ConfigError("--steps produced an empty list")
    return steps


def _gen_dataset(task: str, n: int, seed: int, cfg: dict) -> DemoDataset:
    tp = cfg.get("tp", 16)
    if task == "bimodal":
        return gen_bimodal(n, cfg.get("p_left", 0.5), seed)
    if task == "pusht":
        return gen_pusht(
            n, seed, tp=tp, ta=cfg.get("ta", 8),
            stop_coverage=cfg.get("stop_coverage", 0.95), noise=cfg.get("noise", 0.0),
            dwell=cfg.get("dwell", 0),
        )
    return gen_affordance(n, seed, tp=tp, n_distractors=cfg.get("n_distractors"))


def cmd_gen_data(args) -> int:
    from .plotting import plot_dataset

    cfg = _load_cfg(args)
    n = args.n if args.n is not None else cfg.get("n", 200)
    args.out.mkdir(parents=True, exist_ok=True)
    ds = _gen_dataset(args.task, n, args.seed, cfg)
    path = args.out / f"{args.task}.fmds"
    ds.save(path)
    plot_dataset(ds, args.out / f"{args.task}_data.png")
    log.info("wrote %d samples to %s", len(ds), path)
    return 0


def cmd_train(args) -> int:
    from .plotting import plot_loss_curve

    cfg = _load_cfg(args)
    data = DemoDataset.load(args.data)
    epochs = args.epochs if args.epochs is not None else cfg.get("epochs", 200)
    tc = TrainConfig(
        task=args.task,
        policy=args.policy,
        epochs=epochs,
        batch_size=cfg.get("batch_size", 64),
        lr=cfg.get("lr", 1e-4),
        weight_decay=cfg.get("weight_decay", 1e-6),
        seed=args.seed,
        tp=data.tp,
        ta=cfg.get("ta", 8),
        diffusion_k=cfg.get("diffusion_k", 16),
        checkpoint_every=cfg.get("checkpoint_every", 0),
        holdout_fraction=cfg.get("holdout_fraction", 0.1),
        channels=cfg.get("channels", (32, 64)),
        groups=cfg.get("groups", 8),
        time_embed_dim=cfg.get("time_embed_dim", 32),
    )
    args.out.mkdir(parents=True, exist_ok=True)
    _, curve = train(tc, data, out_dir=args.out)
    write_loss_csv(curve, args.out / "loss.csv")
    plot_loss_curve(args.out / "loss.csv", args.out / "loss.png")
    log.info("final train loss %.5f; checkpoint at %s", curve[-1][1], args.out / "model.fmck")
    return 0


def _bench_report(args, steps_list):
    cfg = _load_cfg(args)
    model = load_checkpoint(args.model)
    if model.kind != args.policy:
        raise ConfigError(f"checkpoint is a {model.kind!r} policy, --policy says {args.policy!r}")
    data = DemoDataset.load(args.data)
    if args.task == "pusht":
        env = PushTEnv(PushTConfig())
        return bench_steps(
            model,
            env,
            steps_list,
            n_conditions=cfg.get("n_conditions", 20),
            n_replications=cfg.get("n_replications", 1),
            seed=args.seed,
            task=args.task,
            steps_budget=cfg.get("steps_budget", 300),
            ta=cfg.get("ta", 8),
        )
    _, holdout = data.split(cfg.get("holdout_fraction", 0.1), RngStream(args.seed).child(0))
    return bench_traj_steps(
        model,
        holdout.samples,
        steps_list,
        seed=args.seed,
        task=args.task,
        max_samples=cfg.get("eval_samples"),
    )


def cmd_eval(args) -> int:
    steps_list = _parse_steps(args.steps)
    if len(steps_list) != 1:
        raise ConfigError("eval expects a single --steps value; use bench for sweeps")
    args.out.mkdir(parents=True, exist_ok=True)
    report = _bench_report(args, steps_list)
    report.to_csv(args.out / "metrics.csv")
    row = report.rows[0]
    log.info("metric %.5f latency %.2f ms at %d steps", row["metric"], row["latency_ms_mean"], row["steps"])
    return 0


def cmd_bench(args) -> int:
    from .plotting import plot_metrics

    steps_list = _parse_steps(args.steps)
    args.out.mkdir(parents=True, exist_ok=True)
    report = _bench_report(args, steps_list)
    report.to_csv(args.out / "metrics.csv")
    plot_metrics(args.out / "metrics.csv", args.out)
    log.info("wrote %d rows to %s", len(report.rows), args.out / "metrics.csv")
    return 0


def cmd_plot_data(args) -> int:
    from .plotting import plot_dataset, plot_loss_curve, plot_metrics

    made = []
    if (args.out / "loss.csv").exists():
        made.append(plot_loss_curve(args.out / "loss.csv", args.out / "loss.png"))
    if (args.out / "metrics.csv").exists():
        made.extend(plot_metrics(args.out / "metrics.csv", args.out))
    if args.data is not None:
        ds = DemoDataset.load(args.data)
        made.append(plot_dataset(ds, args.out / f"{ds.task_id}_data.png"))
    if not made:
        raise ConfigError(f"nothing to plot in {args.out} (no loss.csv, metrics.csv, or --data)")
    log.info("rendered %d figure(s)", len(made))
    return 0


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "plot-data": cmd_plot_data,
}


def main(argv=None) -> int:
    setup_logging()
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, CheckpointError, UnfittedError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
