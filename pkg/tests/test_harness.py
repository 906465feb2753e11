import dataclasses
import json
import math

import numpy as np
import pytest

from goaltrack import harness
from goaltrack.agents import PidConfig, TrainConfig
from goaltrack.channel import ChannelParams
from goaltrack.env import Action, ActionSpace, EnvConfig, MobilityParams
from goaltrack.harness import ConfigError, ExperimentConfig
from goaltrack.neuralnet import init_params, save_checkpoint
from goaltrack.world import ValueParams

PERFECT = ChannelParams(tx_power_dbm=300.0)


def small_cfg(**kw) -> ExperimentConfig:
    env = EnvConfig(n_ttis=20)
    base = ExperimentConfig(env=env, train=TrainConfig(n_iterations=3, hidden=(16,)), n_eval_runs=40)
    return dataclasses.replace(base, **kw)


def hover_index(env_cfg):
    return ActionSpace(env_cfg).index(Action(0.0, 0.0, 0.0, 1))


@pytest.mark.parametrize("d_th", [1.5, 2.0, 2.5, 7.0, 150.0])
def test_hover_against_departing_target(d_th):
    # target heads off along +x at 1 m per TTI from a 1 m gap; d_n = 1 + n exactly
    env = EnvConfig(mobility=MobilityParams(speed=1000.0, max_turn=0.0), value=ValueParams(d_th=d_th))
    cfg = ExperimentConfig(env=env, n_eval_runs=5)
    hover = hover_index(env)
    m = harness.evaluate(lambda s: np.full(len(s), hover), cfg)
    n = env.n_ttis
    expected = min(n, math.floor(d_th - 1)) / n
    assert m.p_success == expected
    assert m.mean_distance == pytest.approx(1 + (n + 1) / 2, abs=1e-12)


def test_perfect_tracking_scores_one():
    env = EnvConfig(mobility=MobilityParams(speed=0.0, max_turn=0.0), channel=PERFECT)
    m = harness.evaluate(PidConfig(), ExperimentConfig(env=env, n_eval_runs=10))
    assert m.p_success == 1.0
    assert m.mean_episode_return == env.n_ttis


def test_aggregate_equals_mean_of_runs():
    cfg = small_cfg()
    m = harness.evaluate(PidConfig(), cfg)
    assert abs(m.p_success - m.run_p_success.mean()) < 1e-12
    assert abs(m.mean_distance - m.run_mean_distance.mean()) < 1e-12
    assert abs(m.mean_episode_return - m.run_return.mean()) < 1e-12
    assert 0.0 <= m.p_success <= 1.0
    assert np.array_equal(m.seeds, np.arange(40))


def test_metrics_csv_is_reproducible(tmp_path):
    cfg = small_cfg()
    for name in ("a", "b"):
        m = harness.evaluate(PidConfig(), cfg)
        harness.write_metrics(tmp_path / name / "metrics.csv", "pid", cfg.env.value.d_th, m)
        harness.write_runs(tmp_path / name / "runs.csv", m)
    for f in ("metrics.csv", "runs.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    lines = (tmp_path / "a" / "metrics.csv").read_text().splitlines()
    assert lines[0] == ",".join(harness.METRICS_COLUMNS)
    assert (tmp_path / "a" / "runs.csv").read_text().splitlines()[0] == ",".join(harness.RUNS_COLUMNS)


def test_sweep_rows_and_monotonicity(rng):
    cfg = small_cfg(d_th_sweep=(0.5, 1.0, 2.0, 3.5))
    theta = init_params((3, 16, 810), rng)
    rows, summary = harness.sweep_threshold(cfg, theta)
    assert len(rows) == len(harness.VARIANTS) * len(cfg.d_th_sweep)
    for v in harness.VARIANTS:
        ps = [r.p_success for r in rows if r.variant == v]
        assert ps == sorted(ps)
    assert summary["pid_k_best"] in cfg.env.k_choices
    assert set(summary["p_success_at_reference"]) == set(harness.VARIANTS)


def test_pid_budget_choice():
    cfg = small_cfg()
    assert harness.pick_pid_k(dataclasses.replace(cfg, pid=PidConfig(k_best=4))) == 4
    # with a perfect channel every budget ties, so the smallest wins
    env = dataclasses.replace(cfg.env, channel=PERFECT)
    assert harness.pick_pid_k(dataclasses.replace(cfg, env=env)) == 1


def test_config_round_trip():
    cfg = ExperimentConfig()
    assert harness.config_from_dict(json.loads(json.dumps(harness.config_to_dict(cfg)))) == cfg


def test_config_partial_override(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"n_eval_runs": 7, "env": {"value": {"d_th": 3.0}, "k_choices": [1, 2]}}))
    cfg = harness.load_config(path)
    assert cfg.n_eval_runs == 7 and cfg.env.value.d_th == 3.0 and cfg.env.k_choices == (1, 2)
    assert cfg.env.n_ttis == 100


@pytest.mark.parametrize(
    "data, needle",
    [
        ({"bogus": 1}, "bogus"),
        ({"env": {"channel": {"tx_pwr": 1}}}, "config.env.channel"),
        ({"n_eval_runs": 0}, "n_eval_runs"),
        ({"d_th_sweep": []}, "d_th_sweep"),
        ({"d_th_sweep": [1.0, -2.0]}, "d_th_sweep"),
        ({"env": {"k_choices": 3}}, "expected a list"),
        ({"train": 5}, "expected an object"),
    ],
)
def test_config_rejects_bad_input(data, needle):
    with pytest.raises(ConfigError, match=needle):
        harness.config_from_dict(data)


def test_missing_and_invalid_config(tmp_path):
    with pytest.raises(ConfigError, match="nowhere.json"):
        harness.load_config(tmp_path / "nowhere.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        harness.load_config(bad)


def test_seed_precedence(monkeypatch):
    cfg = ExperimentConfig(seed=3)
    monkeypatch.delenv(harness.SEED_ENV_VAR, raising=False)
    assert harness.resolve_seed(cfg, None).seed == 3
    monkeypatch.setenv(harness.SEED_ENV_VAR, "11")
    assert harness.resolve_seed(cfg, None).seed == 11
    out = harness.resolve_seed(cfg, 42)
    assert out.seed == 42 and out.train.seed == 42
    monkeypatch.setenv(harness.SEED_ENV_VAR, "x")
    with pytest.raises(ConfigError):
        harness.resolve_seed(cfg, None)


def test_checkpoint_action_space_guard(tmp_path, rng):
    path = tmp_path / "ck.npz"
    save_checkpoint(path, init_params((3, 8, 810), rng), meta={"action_grids": [[0.0], [0.0], [0.0], [1]]})
    with pytest.raises(ConfigError):
        harness.load_policy_params(path, ActionSpace(EnvConfig()))


def test_trace_rows():
    env = EnvConfig(n_ttis=15)
    rows = harness.run_trace(PidConfig(), env, seed=0)
    assert len(rows) == 15
    assert [r[0] for r in rows] == list(range(1, 16))
    assert all(len(r) == len(harness.TRACE_COLUMNS) for r in rows)


@pytest.mark.parametrize("name", ["default.json", "desk.json", "smoke.json"])
def test_shipped_configs_load(name):
    from pathlib import Path

    cfg = harness.load_config(Path(__file__).resolve().parent.parent / "configs" / name)
    assert cfg.train.hidden == (128, 128)
    assert len(ActionSpace(cfg.env)) == 810
