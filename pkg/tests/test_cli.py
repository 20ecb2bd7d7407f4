"""Command-line surface and on-disk artifacts."""

import json

import numpy as np
import pytest

from pulsepinn import artifacts, trainer
from pulsepinn.cli import main
from pulsepinn.errors import NonFiniteGradient

TINY = ["--n-steps", "20", "--t-final", "2", "--lr", "1e-3"]


def files_of(path):
    return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


def rows(path):
    return artifacts.read_csv(path)


@pytest.fixture
def run_dir(tmp_path):
    out = tmp_path / "run"
    assert main(["train", *TINY, "--epochs", "4", "--out-dir", str(out)]) == 0
    return out


def test_train_writes_every_artifact(run_dir):
    names = {p.name for p in run_dir.iterdir()}
    assert {"config.json", "loss_curve.csv", "controls.csv", "populations.csv", "final_operator.json",
            "report.json", "weights.json"} <= names
    header, data = rows(run_dir / "loss_curve.csv")
    assert header == ["epoch", "l_total", "l_model", "l_fid", "fidelity"] and len(data) == 4
    header, data = rows(run_dir / "controls.csv")
    assert header == ["t", "u1", "u2", "u3", "u4"] and len(data) == 20
    header, data = rows(run_dir / "populations.csv")
    assert header == ["t", "p00", "p01", "p10", "p11"] and len(data) == 20
    np.testing.assert_allclose(data[:, 1:].sum(axis=1), 1.0, atol=1e-12)
    op = json.loads((run_dir / "final_operator.json").read_text())
    assert op["kind"] == "propagator" and np.shape(op["real"]) == (4, 4)
    report = json.loads((run_dir / "report.json").read_text())
    assert report["status"] == "ok" and 0 <= report["final_fidelity"] <= 1
    assert set(report["versions"]) >= {"pulsepinn", "numpy", "python"}


def test_lindblad_artifacts(tmp_path):
    out = tmp_path / "open"
    assert main(["train", "--model", "lindblad", "--gamma-abs", "1e-5", "--gamma-em", "1e-5",
                 *TINY, "--epochs", "2", "--out-dir", str(out)]) == 0
    header, data = rows(out / "loss_curve.csv")
    assert header == ["epoch", "l_total", "l_model", "l_fid", "l_trace", "fidelity"] and len(data) == 2
    assert json.loads((out / "final_operator.json").read_text())["kind"] == "channel"


def test_zero_epochs(tmp_path):
    out = tmp_path / "zero"
    assert main(["train", *TINY, "--epochs", "0", "--out-dir", str(out)]) == 0
    assert len(rows(out / "loss_curve.csv")[1]) == 0
    assert len(rows(out / "controls.csv")[1]) == 20


def test_runs_are_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["train", *TINY, "--epochs", "3", "--seed", "5", "--out-dir", str(tmp_path / name)]) == 0
    a, b = files_of(tmp_path / "a"), files_of(tmp_path / "b")
    a.pop("timing.json"), b.pop("timing.json")
    assert a.keys() == b.keys()
    differing = [k for k in a if a[k] != b[k] and k != "config.json"]
    assert differing == []


def test_config_file_reproduces_run(tmp_path, run_dir):
    out = tmp_path / "again"
    cfg = json.loads((run_dir / "config.json").read_text())
    cfg["out_dir"] = str(out)
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    assert main(["train", "--config", str(tmp_path / "cfg.json")]) == 0
    for name in ("loss_curve.csv", "controls.csv", "weights.json", "report.json"):
        assert (out / name).read_bytes() == (run_dir / name).read_bytes()


def test_seed_environment_override(tmp_path, monkeypatch):
    monkeypatch.setenv("PULSEPINN_SEED", "17")
    out = tmp_path / "env"
    assert main(["train", *TINY, "--epochs", "0", "--seed", "1", "--out-dir", str(out)]) == 0
    assert json.loads((out / "config.json").read_text())["seed"] == 17


def test_config_error_exit_code(tmp_path, capsys):
    assert main(["train", "--gamma-abs", "-1", "--out-dir", str(tmp_path / "x")]) == 2
    assert "gamma_abs" in capsys.readouterr().err


def test_numerical_abort_exit_code(tmp_path, monkeypatch):
    def broken(state, weights, gradients):
        raise NonFiniteGradient("synthetic")

    monkeypatch.setattr(trainer, "adam_step", broken)
    out = tmp_path / "abort"
    assert main(["train", *TINY, "--epochs", "3", "--out-dir", str(out)]) == 3
    report = json.loads((out / "report.json").read_text())
    assert report["status"] == "aborted" and "synthetic" in report["error"]


def test_validate(run_dir):
    assert main(["validate", str(run_dir)]) == 0
    header, data = rows(run_dir / "validation" / "populations.csv")
    assert header == ["t", "p00", "p01", "p10", "p11"] and len(data) == 21
    report = json.loads((run_dir / "validation" / "report.json").read_text())
    assert 0 <= report["state_fidelity"] <= 1
    assert "crosscheck_fidelity" not in report


def test_validate_paired(tmp_path, run_dir):
    twin = tmp_path / "twin"
    assert main(["train", "--model", "lindblad", *TINY, "--epochs", "1", "--out-dir", str(twin)]) == 0
    assert main(["validate", str(twin), "--paired", str(run_dir)]) == 0
    report = json.loads((twin / "validation" / "report.json").read_text())
    assert 0 <= report["crosscheck_fidelity"] <= 1


def test_validate_missing_controls(run_dir):
    (run_dir / "controls.csv").unlink()
    assert main(["validate", str(run_dir)]) == 2


def test_sweep(tmp_path):
    sweep_doc = {"base": {"epochs": 1, "n_steps": 20, "t_final": 2.0},
            "gates": ["cnot", "swap"], "gammas": [0.0, 1e-2]}
    (tmp_path / "sweep.json").write_text(json.dumps(sweep_doc))
    assert main(["sweep", str(tmp_path / "sweep.json"), "--out-dir", str(tmp_path / "out"), "--workers", "1"]) == 0
    lines = (tmp_path / "out" / "summary.csv").read_text().splitlines()
    assert lines[0].split(",") == ["gate", "gamma", "omega0", "activation", "seed", "final_fidelity", "wall_clock_s", "status"]
    assert len(lines) == 5 and all(line.endswith(",ok") for line in lines[1:])
    assert len(list((tmp_path / "out" / "runs").iterdir())) == 4


def test_sweep_empty_grid(tmp_path):
    (tmp_path / "sweep.json").write_text(json.dumps({"gates": []}))
    assert main(["sweep", str(tmp_path / "sweep.json"), "--out-dir", str(tmp_path / "out")]) == 2


def test_diagnose(tmp_path):
    out = tmp_path / "diag"
    assert main(["diagnose", "--out-dir", str(out)]) == 0
    layers = ["layer0", "layer1", "layer2", "layer3", "layer4"]
    for layer in layers:
        for kind in ("linear", "activation", "gradient"):
            header, data = rows(out / f"{layer}_{kind}_hist.csv")
            assert header == ["bin_left", "bin_right", "count"] and len(data) == 64
        assert rows(out / f"{layer}_spectrum.csv")[0] == ["frequency", "magnitude"]
    assert (out / "output_gradient_hist.csv").exists() and not (out / "output_activation_hist.csv").exists()
    again = tmp_path / "diag2"
    assert main(["diagnose", "--out-dir", str(again)]) == 0
    assert files_of(out) == files_of(again)
