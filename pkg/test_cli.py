import json
from pathlib import Path

import pytest

from app import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from config import settings

CONFIG = """
model.architecture = MLP5
model.width_scale = 0.05
data.source = synthetic
data.num_classes = 3
data.synthetic_per_class = 30
data.synthetic_dims = [8]
method.name = snip-it
method.kappa_final = 0.8
method.tau = 0
method.steps = 2
method.criterion_size = 32
optim.batch_size = 16
run.epochs = 1
run.seeds = [0]
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(CONFIG)
    return path


def _last_line(capsys) -> Path:
    return Path(capsys.readouterr().out.strip().splitlines()[-1])


def test_run_command(tmp_path, config_file, capsys):
    assert main(["run", "--config", str(config_file), "--out", str(tmp_path / "out")]) == EXIT_OK
    run_dir = _last_line(capsys)
    assert run_dir.parent == tmp_path / "out" and run_dir.name.startswith("run_")
    summary = json.loads((run_dir / "summary.json").read_text())
    assert summary["method"] == "snip-it" and summary["seeds"] == [0]


def test_seed_options_override_the_file(tmp_path, config_file, capsys):
    assert main(["run", "--config", str(config_file), "--out", str(tmp_path), "--seed", "4", "--seed", "5"]) == 0
    summary = json.loads((_last_line(capsys) / "summary.json").read_text())
    assert summary["seeds"] == [4, 5]
    assert summary["acc_ci"] is not None


def test_sweep_hist_and_report_commands(tmp_path, config_file, capsys):
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(config_file), "--out", str(out), "--kappa", "0.5,0.8"]) == EXIT_OK
    sweep_dir = _last_line(capsys)
    assert (sweep_dir / "sweep.csv").exists() and (sweep_dir / "headline.json").exists()
    assert main(["report", str(sweep_dir)]) == EXIT_OK

    run_dirs = sorted(p for p in out.iterdir() if p.name.startswith("run_"))
    assert len(run_dirs) == 2
    checkpoint = run_dirs[0] / "model_seed0.ckpt"
    assert main(["hist", "--config", str(config_file), "--checkpoint", str(checkpoint), "--bins", "8"]) == EXIT_OK
    hist_dir = _last_line(capsys)
    assert hist_dir == run_dirs[0] / "hist_model_seed0"
    assert (hist_dir / "elasticity_curve.csv").exists()
    assert main(["report", str(run_dirs[0])]) == EXIT_OK


@pytest.mark.parametrize("argv", [
    ["run", "--config", "does-not-exist.cfg"],
    ["sweep", "--kappa", "0.5,1.5"],
    ["run", "--unknown-flag"],
    ["frobnicate"],
])
def test_usage_and_config_errors_exit_one(argv):
    assert main(argv) == EXIT_CONFIG


def test_invalid_config_values_exit_one(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("method.name = snap-it\nmethod.tau = 3\n")
    assert main(["run", "--config", str(path)]) == EXIT_CONFIG
    path.write_text("model.width_scale = 0\n")
    assert main(["run", "--config", str(path)]) == EXIT_CONFIG


def test_report_of_empty_directory_exits_one(tmp_path):
    assert main(["report", str(tmp_path)]) == EXIT_CONFIG


def test_runtime_failures_exit_two(tmp_path, config_file):
    assert main(["report", str(tmp_path / "missing")]) == EXIT_RUNTIME
    assert main(["hist", "--config", str(config_file), "--checkpoint", str(tmp_path / "none.ckpt")]) == EXIT_RUNTIME
    mnist = tmp_path / "mnist.cfg"
    mnist.write_text(f"data.directory = {tmp_path / 'no-mnist-here'}\nrun.seeds = [0]\n")
    assert main(["run", "--config", str(mnist), "--out", str(tmp_path / "out")]) == EXIT_RUNTIME


def test_version_flag(capsys):
    assert main(["--version"]) == EXIT_OK
    assert settings.VERSION in capsys.readouterr().out
