import json
import os
import subprocess
import sys

import pytest

from goaltrack import cli

TINY = {
    "n_eval_runs": 12,
    "d_th_sweep": [1.0, 2.0, 3.0],
    "env": {"n_ttis": 15},
    "train": {"n_iterations": 3, "hidden": [16], "batch_size": 8},
}


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY))
    return path


def run_cli(*args, env_extra=None):
    env = dict(os.environ)
    env.pop("GOALTRACK_SEED", None)
    env.update(env_extra or {})
    return subprocess.run([sys.executable, "-m", "goaltrack", *map(str, args)], capture_output=True, text=True, env=env)


def test_train_then_eval_and_trace(tiny, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["train", "--config", str(tiny), "--out", str(out), "--seed", "1"]) == 0
    ck = out / "checkpoint.npz"
    assert ck.is_file()
    log = (out / "train_log.csv").read_text().splitlines()
    assert log[0] == "episode,epsilon,return,loss" and len(log) == 4

    assert cli.main(["eval", "--config", str(tiny), "--out", str(out), "--checkpoint", str(ck)]) == 0
    assert (out / "metrics.csv").read_text().startswith("variant,d_th,p_success")
    assert len((out / "runs.csv").read_text().splitlines()) == 13

    assert cli.main(["eval", "--config", str(tiny), "--out", str(out / "pid"), "--policy", "pid", "--k-max", "3", "--runs", "5"]) == 0
    assert (out / "pid" / "metrics.csv").read_text().splitlines()[1].startswith("pid_k3,")
    assert len((out / "pid" / "runs.csv").read_text().splitlines()) == 6

    assert cli.main(["trace", "--config", str(tiny), "--out", str(out), "--checkpoint", str(ck)]) == 0
    trace = (out / "trace.csv").read_text().splitlines()
    assert trace[0].startswith("n,j_used,decoded,d_n,reward") and len(trace) == 16


def test_sweep_writes_csv(tiny, tmp_path, capsys):
    out = tmp_path / "results"
    assert cli.main(["sweep", "--config", str(tiny), "--out", str(out)]) == 0
    rows = (out / "sweep.csv").read_text().splitlines()
    assert rows[0] == "variant,d_th,p_success,mean_distance" and len(rows) == 1 + 4 * 3
    summary = json.loads(capsys.readouterr().out)
    assert "ratio_deepp_kopt_over_pid_k1" in summary
    # reuse the checkpoint the sweep just trained
    assert cli.main(["sweep", "--config", str(tiny), "--out", str(tmp_path / "again"), "--checkpoint", str(out / "checkpoint.npz")]) == 0
    assert (tmp_path / "again" / "sweep.csv").read_bytes() == (out / "sweep.csv").read_bytes()


def test_train_and_sweep_byte_identical_across_processes(tiny, tmp_path):
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        r = run_cli("sweep", "--config", tiny, "--out", out, "--seed", 5)
        assert r.returncode == 0, r.stderr
        outputs.append({f: (out / f).read_bytes() for f in ("checkpoint.npz", "train_log.csv", "sweep.csv")})
    assert outputs[0] == outputs[1]


def test_seed_from_environment(tiny, tmp_path):
    a = run_cli("train", "--config", tiny, "--out", tmp_path / "a", env_extra={"GOALTRACK_SEED": "8"})
    b = run_cli("train", "--config", tiny, "--out", tmp_path / "b", "--seed", 8)
    c = run_cli("train", "--config", tiny, "--out", tmp_path / "c")
    assert a.returncode == b.returncode == c.returncode == 0
    ck = [(tmp_path / n / "checkpoint.npz").read_bytes() for n in "abc"]
    assert ck[0] == ck[1] != ck[2]


def test_missing_config_names_path(tmp_path):
    r = run_cli("sweep", "--config", tmp_path / "missing.json")
    assert r.returncode != 0
    assert "missing.json" in r.stderr


@pytest.mark.parametrize(
    "argv",
    [
        ["eval", "--policy", "deepp"],
        ["eval", "--policy", "pid", "--k-max", "99", "--runs", "2"],
        ["eval", "--policy", "pid", "--runs", "0"],
        ["train", "--episodes", "0"],
    ],
)
def test_validation_failures_exit_nonzero(argv, tmp_path, capsys):
    assert cli.main([*argv, "--out", str(tmp_path)]) == 1
    assert capsys.readouterr().err.startswith("goaltrack: error:")


def test_bad_checkpoint_path(tmp_path, capsys):
    assert cli.main(["eval", "--checkpoint", str(tmp_path / "none.npz"), "--out", str(tmp_path)]) == 1
    assert "none.npz" in capsys.readouterr().err


def test_usage_errors():
    with pytest.raises(SystemExit) as exc:
        cli.main(["fly"])
    assert exc.value.code == 2
    assert run_cli("--help").returncode == 0
