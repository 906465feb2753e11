"""Command line entry point: ``goaltrack {train,eval,sweep,trace}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import harness
from .harness import ConfigError, ExperimentConfig

log = logging.getLogger("goaltrack")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON experiment config (defaults if omitted)")
    p.add_argument("--seed", type=int, help="master seed; overrides GOALTRACK_SEED and the config")
    p.add_argument("--out", type=Path, help="output directory (default: config out_dir)")
    p.add_argument("--checkpoint", type=Path, help="Q-network checkpoint (.npz)")
    p.add_argument("--runs", type=int, help="number of evaluation episodes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="goaltrack",
        description="Train, evaluate and compare UAV tracking controllers over a fading C&C downlink.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the DQN agent and write a checkpoint plus train_log.csv")
    _common(p)
    p.add_argument("--episodes", type=int, help="override the number of training episodes")

    p = sub.add_parser("eval", help="evaluate one policy; writes metrics.csv and runs.csv")
    _common(p)
    p.add_argument("--policy", choices=("deepp", "pid"), default="deepp")
    p.add_argument("--k-max", type=int, help="pin the repetition budget")

    p = sub.add_parser("sweep", help="threshold sweep over the four variants; writes sweep.csv")
    _common(p)
    p.add_argument("--episodes", type=int, help="training episodes when no checkpoint is given")

    p = sub.add_parser("trace", help="single-episode per-TTI trace; writes trace.csv")
    _common(p)
    p.add_argument("--policy", choices=("deepp", "pid"), default="deepp")
    return parser


def _load(args) -> ExperimentConfig:
    cfg = harness.load_config(args.config) if args.config else ExperimentConfig()
    cfg = harness.resolve_seed(cfg, args.seed)
    if args.runs is not None:
        if args.runs < 1:
            raise ConfigError(f"--runs must be >= 1, got {args.runs}")
        cfg = dataclasses.replace(cfg, n_eval_runs=args.runs)
    if getattr(args, "episodes", None) is not None:
        if args.episodes < 1:
            raise ConfigError(f"--episodes must be >= 1, got {args.episodes}")
        cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, n_iterations=args.episodes))
    return cfg


def _train(cfg: ExperimentConfig, out: Path, ckpt: Path):
    agent, rows, meta = harness.train_from_config(cfg)
    harness.save_trained(agent, meta, ckpt)
    harness.write_train_log(out / "train_log.csv", rows)
    log.info("wrote %s and %s", ckpt, out / "train_log.csv")
    return agent.theta


def _policy(args, cfg: ExperimentConfig):
    if args.policy == "pid":
        return cfg.pid
    if args.checkpoint is None:
        raise ConfigError("--checkpoint is required for the deepp policy")
    return args.checkpoint


def run(args) -> int:
    cfg = _load(args)
    out = args.out if args.out is not None else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if args.command == "train":
        _train(cfg, out, args.checkpoint or out / "checkpoint.npz")

    elif args.command == "eval":
        policy = _policy(args, cfg)
        m = harness.evaluate(policy, cfg, k_override=args.k_max)
        variant = f"{args.policy}_k{args.k_max}" if args.k_max else f"{args.policy}"
        harness.write_metrics(out / "metrics.csv", variant, cfg.env.value.d_th, m)
        harness.write_runs(out / "runs.csv", m)
        print(f"{variant}: p_success={m.p_success:.4f} mean_distance={m.mean_distance:.4f}")

    elif args.command == "sweep":
        if args.checkpoint is not None:
            theta = harness.load_policy_params(args.checkpoint, harness.ActionSpace(cfg.env))
        else:
            theta = _train(cfg, out, out / "checkpoint.npz")
        rows, summary = harness.sweep_threshold(cfg, theta)
        harness.write_sweep(out / "sweep.csv", rows)
        print(json.dumps(summary, indent=2, sort_keys=True))

    elif args.command == "trace":
        rows = harness.run_trace(_policy(args, cfg), cfg.env, cfg.seed)
        harness.write_trace(out / "trace.csv", rows)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return run(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"goaltrack: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
