"""Experiment orchestration: config ingestion, seeded evaluation, threshold sweep, CSV output."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .agents import GreedyPolicy, PidConfig, PidPolicy, TrainConfig, TrainLogRow, train
from .env import TRACE_COLUMNS, ActionSpace, EnvConfig, Rollout, TrackingEnv, run_episodes
from .neuralnet import QNetParams, load_checkpoint, save_checkpoint
from .world import value_array

log = logging.getLogger(__name__)

SEED_ENV_VAR = "GOALTRACK_SEED"
SWEEP_COLUMNS = ("variant", "d_th", "p_success", "mean_distance")
METRICS_COLUMNS = ("variant", "d_th", "p_success", "mean_distance", "mean_episode_return", "mean_substep_value")
RUNS_COLUMNS = ("seed", "p_success", "mean_distance", "episode_return")
TRAIN_LOG_COLUMNS = ("episode", "epsilon", "return", "loss")
VARIANTS = ("pid_k1", "pid_kbest", "deepp_k1", "deepp_kopt")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    pid: PidConfig = field(default_factory=PidConfig)
    n_eval_runs: int = 1000
    d_th_sweep: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0, 5.0)
    out_dir: str = "results"
    seed: int = 0

    def __post_init__(self):
        if self.n_eval_runs < 1:
            raise ValueError(f"n_eval_runs must be >= 1, got {self.n_eval_runs}")
        if not self.d_th_sweep or any(not d > 0 for d in self.d_th_sweep):
            raise ValueError("d_th_sweep must be non-empty and positive")

    def eval_seeds(self) -> np.ndarray:
        return self.seed + np.arange(self.n_eval_runs, dtype=np.int64)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Master seed drives both the evaluation range and the training run."""
        return dataclasses.replace(self, seed=seed, train=dataclasses.replace(self.train, seed=seed))


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for key, val in data.items():
        hint = hints[key]
        if dataclasses.is_dataclass(hint):
            kwargs[key] = _build(hint, val, f"{where}.{key}")
        elif typing.get_origin(hint) is tuple:
            if not isinstance(val, list):
                raise ConfigError(f"{where}.{key}: expected a list")
            kwargs[key] = tuple(val)
        else:
            kwargs[key] = val
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "config")


def config_to_dict(cfg) -> dict:
    return json.loads(json.dumps(dataclasses.asdict(cfg)))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)


def resolve_seed(cfg: ExperimentConfig, cli_seed: int | None) -> ExperimentConfig:
    """CLI flag beats ``GOALTRACK_SEED`` beats the config file."""
    if cli_seed is not None:
        return cfg.with_seed(cli_seed)
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed:
        try:
            return cfg.with_seed(int(env_seed))
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}") from None
    return cfg


@dataclass
class Metrics:
    p_success: float
    mean_distance: float
    mean_episode_return: float
    mean_substep_value: float
    run_p_success: np.ndarray
    run_mean_distance: np.ndarray
    run_return: np.ndarray
    seeds: np.ndarray


def metrics_from_rollout(ro: Rollout, d_th: float) -> Metrics:
    """Success is counted on TTI-end distances; sub-step values feed the averaged objective."""
    hits = ro.distances <= d_th
    rewards = value_array(ro.distances, d_th)
    return Metrics(
        p_success=float(hits.mean()),
        mean_distance=float(ro.distances.mean()),
        mean_episode_return=float(rewards.sum(axis=1).mean()),
        mean_substep_value=float(value_array(ro.substep_distances, d_th).mean()),
        run_p_success=hits.mean(axis=1),
        run_mean_distance=ro.distances.mean(axis=1),
        run_return=rewards.sum(axis=1),
        seeds=ro.seeds,
    )


def _check_meta(meta: dict, space: ActionSpace) -> None:
    grids = meta.get("action_grids")
    if grids is not None and [list(g) for g in grids] != [list(g) for g in space.grids]:
        raise ConfigError("checkpoint was trained on a different action space")


def load_policy_params(path, space: ActionSpace) -> QNetParams:
    theta, _, meta = load_checkpoint(path)
    _check_meta(meta, space)
    return theta


def make_policy(policy, env_cfg: EnvConfig, k_override: int | None = None) -> Callable:
    """Turn a checkpoint path, Q-network, or :class:`PidConfig` into a batch policy."""
    space = ActionSpace(env_cfg)
    if isinstance(policy, (str, Path)):
        policy = load_policy_params(policy, space)
    if isinstance(policy, QNetParams):
        return GreedyPolicy(policy, space, k_override)
    if isinstance(policy, PidConfig):
        return PidPolicy(policy, space, env_cfg.tti_len, k_override)
    if callable(policy):
        return policy
    raise TypeError(f"cannot build a policy from {type(policy).__name__}")


def evaluate(policy, cfg: ExperimentConfig, k_override: int | None = None) -> Metrics:
    """Run ``n_eval_runs`` episodes on seeds ``seed + i`` and score them at the env's ``d_th``."""
    ro = run_episodes(make_policy(policy, cfg.env, k_override), cfg.env, cfg.eval_seeds())
    return metrics_from_rollout(ro, cfg.env.value.d_th)


def pick_pid_k(cfg: ExperimentConfig) -> int:
    """Repetition budget at which the P-controller scores best at the reference ``d_th``; ties go low."""
    if cfg.pid.k_best is not None:
        return int(cfg.pid.k_best)
    best_k, best_p = None, -1.0
    for k in sorted(cfg.env.k_choices):
        p = evaluate(cfg.pid, cfg, k_override=k).p_success
        if p > best_p:
            best_k, best_p = k, p
    return best_k


@dataclass(frozen=True)
class SweepRow:
    variant: str
    d_th: float
    p_success: float
    mean_distance: float


def sweep_threshold(cfg: ExperimentConfig, theta: QNetParams) -> tuple[list[SweepRow], dict]:
    """Score the four compared variants at every threshold on one shared seed set.

    Trajectories do not depend on ``d_th``, so each variant is rolled out once
    and rescored per threshold. Returns the rows and a summary with the
    chosen P-controller budget and the success ratios at the reference ``d_th``.
    """
    k_best = pick_pid_k(cfg)
    seeds = cfg.eval_seeds()
    policies = {
        "pid_k1": make_policy(cfg.pid, cfg.env, 1),
        "pid_kbest": make_policy(cfg.pid, cfg.env, k_best),
        "deepp_k1": make_policy(theta, cfg.env, 1),
        "deepp_kopt": make_policy(theta, cfg.env),
    }
    rows = []
    rollouts = {}
    for name in VARIANTS:
        rollouts[name] = ro = run_episodes(policies[name], cfg.env, seeds)
        for d_th in cfg.d_th_sweep:
            m = metrics_from_rollout(ro, d_th)
            rows.append(SweepRow(name, float(d_th), m.p_success, m.mean_distance))

    ref = cfg.env.value.d_th
    at_ref = {name: metrics_from_rollout(rollouts[name], ref).p_success for name in VARIANTS}
    summary = {
        "pid_k_best": k_best,
        "reference_d_th": ref,
        "p_success_at_reference": at_ref,
        "ratio_deepp_kopt_over_pid_k1": _ratio(at_ref["deepp_kopt"], at_ref["pid_k1"]),
        "ratio_deepp_k1_over_pid_k1": _ratio(at_ref["deepp_k1"], at_ref["pid_k1"]),
    }
    return rows, summary


def _ratio(a: float, b: float) -> float:
    return a / b if b > 0 else float("inf")


def train_from_config(cfg: ExperimentConfig):
    space = ActionSpace(cfg.env)
    agent, rows = train(cfg.env, cfg.train)
    meta = {
        "action_grids": [list(g) for g in space.grids],
        "train": config_to_dict(cfg.train),
        "env_d_th": cfg.env.value.d_th,
    }
    return agent, rows, meta


def save_trained(agent, meta: dict, path) -> None:
    save_checkpoint(path, agent.theta, agent.opt, meta)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_sweep(path, rows: list[SweepRow]) -> Path:
    return write_csv(path, SWEEP_COLUMNS, [(r.variant, r.d_th, r.p_success, r.mean_distance) for r in rows])


def write_train_log(path, rows: list[TrainLogRow]) -> Path:
    return write_csv(path, TRAIN_LOG_COLUMNS, [(r.episode, r.epsilon, r.episode_return, r.loss) for r in rows])


def write_metrics(path, variant: str, d_th: float, m: Metrics) -> Path:
    row = (variant, d_th, m.p_success, m.mean_distance, m.mean_episode_return, m.mean_substep_value)
    return write_csv(path, METRICS_COLUMNS, [row])


def write_runs(path, m: Metrics) -> Path:
    order = np.argsort(m.seeds, kind="stable")
    rows = [(m.seeds[i], m.run_p_success[i], m.run_mean_distance[i], m.run_return[i]) for i in order]
    return write_csv(path, RUNS_COLUMNS, rows)


def run_trace(policy, env_cfg: EnvConfig, seed: int) -> list[tuple]:
    """Step one episode through :class:`TrackingEnv` and return its trace rows."""
    pol = make_policy(policy, env_cfg)
    env = TrackingEnv(env_cfg, trace=True)
    s = env.reset(seed)
    done = False
    while not done:
        res = env.step(int(pol(s[None, :])[0]))
        s, done = res.next_state, res.done
    return env.trace_rows


def write_trace(path, rows) -> Path:
    return write_csv(path, TRACE_COLUMNS, rows)
