import json
import math
import subprocess
import sys

import pytest

from forcefit.cli import build_parser, main
from forcefit.config import ENV_VAR
from forcefit.datagen import read_dataset
from forcefit.mlp import load_model

SUBCOMMANDS = [
    "simulate",
    "estimate",
    "generate",
    "sample",
    "split",
    "make-pseudo-experimental",
    "train",
    "evaluate",
    "sweep-lambda",
    "sweep-simsize",
    "pipeline",
]


@pytest.fixture(autouse=True)
def no_env_config(monkeypatch):
    monkeypatch.delenv(ENV_VAR, raising=False)


def summary(capsys):
    out = capsys.readouterr().out.strip().splitlines()[-1]
    return dict(field.split("=", 1) for field in out.split())


@pytest.mark.parametrize("command", SUBCOMMANDS)
def test_help_for_every_subcommand(command, capsys):
    with pytest.raises(SystemExit) as exc:
        main([command, "--help"])
    assert exc.value.code == 0
    assert "usage" in capsys.readouterr().out


def test_unknown_flag_is_usage_error(capsys):
    assert main_exit(["simulate", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err


def main_exit(argv):
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


def test_simulate_writes_svg_and_csv(tmp_path, capsys):
    svg, csv = tmp_path / "out.svg", tmp_path / "out.csv"
    argv = ["simulate", "--distance", "5", "--motor", "0.6", "--angle", "45", "--cl", "0.06", "--cd", "0.91"]
    assert main(argv + ["--svg", str(svg), "--csv", str(csv)]) == 0
    fields = summary(capsys)
    assert fields["terminated_by"] == "ReachedTargetPlane"
    text = svg.read_text()
    assert text.startswith("<svg") and "polyline" in text and "#d62728" in text and "#1f77b4" in text
    assert csv.read_text().splitlines()[0] == "t,x,y,vx,vy"


def test_simulate_motor_zero(capsys):
    assert main(["simulate", "--motor", "0"]) == 0
    fields = summary(capsys)
    assert fields["steps"] == "1" and fields["hit2"] == "0" and fields["hit3"] == "0"


def test_simulate_vacuum_range(tmp_path, capsys):
    cfg = tmp_path / "vac.cfg"
    cfg.write_text("launch.height_m=0.0\nsim.method=rk4\n")
    assert main(["--config", str(cfg), "simulate", "--cl", "0", "--cd", "0", "--angle", "45", "--motor", "0.3", "--distance", "16"]) == 0
    v0 = 0.3 * 628.3 * (0.0508 + 9 / 16 * 0.034925) / 2
    assert float(summary(capsys)["range_m"]) == pytest.approx(v0**2 / 9.81, rel=1e-5)


def test_simulate_invalid_value_exit_1(capsys):
    assert main(["simulate", "--angle", "95"]) == 1
    assert "angle" in capsys.readouterr().err


def test_missing_data_file_exit_2(tmp_path, capsys):
    assert main(["evaluate", "--model", str(tmp_path / "m.json"), "--data", str(tmp_path / "d.csv")]) == 2


def test_malformed_dataset_exit_1(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("distance_m,motor_ratio,angle_deg,hit2,hit3\n5,0.5,45,0,1\n")
    assert main(["split", "--data", str(bad), "--out-train", str(tmp_path / "a"), "--out-test", str(tmp_path / "b")]) == 1


def test_stage_commands_chain(tmp_path, capsys):
    p = lambda name: str(tmp_path / name)  # noqa: E731
    assert main(["make-pseudo-experimental", "--n", "40", "--coeffs", "0.06,0.91", "--noise", "0.05", "--seed", "1", "--out", p("real.csv")]) == 0
    assert len(read_dataset(p("real.csv"))) == 40
    assert main(["split", "--data", p("real.csv"), "--out-train", p("train.csv"), "--out-test", p("test.csv")]) == 0
    assert summary(capsys) == {"train": "32", "test": "8"}
    argv = ["estimate", "--data", p("train.csv"), "--grid-min", "0.05", "--grid-max", "0.07", "--grid-step", "0.01"]
    assert main(argv + ["--drag-min", "0.9", "--drag-max", "0.92", "--drag-step", "0.01", "--top", "4", "--out", p("est.csv")]) == 0
    rows = open(p("est.csv")).read().splitlines()
    assert rows[0] == "cl,cd,acc3,acc2,mean_dev,median_dev" and len(rows) == 5
    assert main(["split", "--data", p("real.csv"), "--test-frac", "0.5", "--out-train", p("poolA.csv"), "--out-test", p("poolB.csv")]) == 0
    assert main(["sample", "--pool", p("poolA.csv"), "--n", "6", "--exclude", p("train.csv"), "--out", p("sim.csv")]) != 0
    assert main(["sample", "--pool", p("real.csv"), "--n", "6", "--exclude", p("test.csv"), "--out", p("sim.csv")]) == 0
    assert len(read_dataset(p("sim.csv"))) == 6
    assert main(["train", "--real", p("train.csv"), "--sim", p("sim.csv"), "--epochs", "3", "--out-model", p("m.json")]) == 0
    load_model(p("m.json"))
    assert main(["evaluate", "--model", p("m.json"), "--data", p("test.csv")]) == 0
    assert set(summary(capsys)) == {"overall_acc", "f1_3pt", "f1_2pt"}
    assert main(["sweep-lambda", "--real", p("train.csv"), "--sim", p("sim.csv"), "--test", p("test.csv"), "--lambdas", "0,0.01", "--epochs", "2", "--out", p("lam.csv")]) == 0
    assert open(p("lam.csv")).read().splitlines()[0] == "lambda,overall_acc,f1_3pt,f1_2pt"
    argv = ["sweep-simsize", "--real", p("train.csv"), "--pool", p("real.csv"), "--test", p("test.csv"), "--exclude", p("test.csv")]
    assert main(argv + ["--sizes", "0,3", "--epochs", "2", "--out", p("sizes.csv")]) == 0
    assert len(open(p("sizes.csv")).read().splitlines()) == 3


def test_stage_outputs_are_idempotent(tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        main(["make-pseudo-experimental", "--n", "30", "--coeffs", "0.06,0.91", "--seed", "4", "--out", str(tmp_path / name)])
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]


def test_pipeline_missing_config_names_path(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["pipeline", "--out-dir", "run"]) == 2
    assert "forcefit.cfg" in capsys.readouterr().err
    assert main(["--config", "elsewhere.cfg", "pipeline", "--out-dir", "run"]) == 2
    assert "elsewhere.cfg" in capsys.readouterr().err


def test_pipeline_deterministic_manifest(tmp_path):
    cfg = tmp_path / "forcefit.cfg"
    cfg.write_text("# defaults\n")
    argv = ["--config", str(cfg), "pipeline", "--n-real", "30", "--sim-size", "30", "--epochs", "2"]
    argv += ["--grid-min", "0.05", "--grid-max", "0.07", "--drag-min", "0.85", "--drag-max", "0.95"]
    manifests = []
    for run in ("r1", "r2"):
        assert main(argv + ["--out-dir", str(tmp_path / run)]) == 0
        manifests.append(json.loads((tmp_path / run / "manifest.json").read_text()))
    a, b = manifests
    assert a["run_id"] == b["run_id"] and a["artifacts"] == b["artifacts"]
    assert [s["stage"] for s in a["stages"]] == [
        "make-pseudo-experimental", "split", "estimate", "generate", "sample", "train", "evaluate"
    ]
    assert set(a["metrics"]) == {"overall_acc", "f1_3pt", "f1_2pt"}
    meta = json.loads((tmp_path / "r1" / "model.json").read_text())["meta"]
    assert meta["run_id"] == a["run_id"]
    assert math.isfinite(a["metrics"]["overall_acc"])


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "forcefit", "simulate", "--motor", "0"], capture_output=True, text=True)
    assert out.returncode == 0 and "StalledBackward" in out.stdout


def test_parser_threads_default():
    assert build_parser().parse_args(["simulate"]).threads == 1
