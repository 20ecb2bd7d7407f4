"""Acceptance suite: full-length training runs checked against the target results.

Each test prints one PASS/FAIL line and the session ends with a summary of
all eight criteria. Training runs are shared through the ``trained`` fixture,
so the whole module costs roughly fifteen full runs.
"""

import shutil
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from pulsepinn import artifacts
from pulsepinn.cli import validate_run
from pulsepinn.config import RunConfig
from pulsepinn.system import GATE_NAMES
from pulsepinn.trainer import Problem, train
from pulsepinn.validator import build_spline, crosscheck

pytestmark = pytest.mark.training

TESTS = Path(__file__).parent
PROPERTY_SUITES = ["test_autodiff.py", "test_linalg.py", "test_system.py", "test_model.py",
                   "test_losses.py", "test_validator.py"]
LINDBLAD_GAMMAS = (0.0, 1e-5, 1e-2, 1e-1)


def schedule_of(run_dir):
    cfg = artifacts.load_config(run_dir)
    return build_spline(artifacts.load_controls(run_dir)[1], artifacts.grid_for(cfg))


def test_gate_fidelities(trained, criterion):
    results, slowest = {}, 0.0
    for gate in GATE_NAMES:
        record, _ = trained(gate=gate)
        results[gate] = record.final_fidelity
        slowest = max(slowest, record.wall_clock_s)
    ok = all(f >= 0.99 for f in results.values()) and slowest <= 30 * 60
    detail = ", ".join(f"{g}={f:.6f}" for g, f in results.items()) + f"; slowest run {slowest:.0f}s"
    criterion(1, "closed-system gate fidelities >= 0.99 within 5000 epochs", ok, detail)


def test_closed_open_crosscheck(trained, criterion):
    values = {}
    for gate in ("cnot", "swap"):
        closed, closed_dir = trained(gate=gate)
        _, open_dir = trained(gate=gate, model="lindblad")
        values[gate] = crosscheck(schedule_of(closed_dir), schedule_of(open_dir), Problem(closed.config).x0)
    ok = all(v >= 0.99 for v in values.values())
    criterion(2, "Schrodinger vs gamma=0 Lindblad crosscheck >= 0.99", ok,
              ", ".join(f"{g}={v:.6f}" for g, v in values.items()))


def test_init_scheme_gap(trained, criterion):
    custom, _ = trained(gate="cnot")
    default, _ = trained(gate="cnot", init="default")
    ok = default.final_fidelity <= 0.7 and custom.final_fidelity >= 0.99
    criterion(3, "default init <= 0.7 while custom init >= 0.99", ok,
              f"default={default.final_fidelity:.6f}, custom={custom.final_fidelity:.6f}")


def test_activation_ordering(trained, criterion):
    f = {a: trained(gate="cnot", activation=a)[0].final_fidelity for a in ("sin", "tanh", "relu")}
    ok = f["sin"] > f["tanh"] > f["relu"]
    criterion(4, "final fidelity sin > tanh > relu", ok, ", ".join(f"{a}={v:.6f}" for a, v in f.items()))


def test_decoherence_trend(trained, criterion):
    f = {g: trained(gate="cnot", model="lindblad", gamma_abs=g, gamma_em=g)[0].final_fidelity
         for g in LINDBLAD_GAMMAS}
    ok = f[1e-1] <= f[0.0] - 0.05 and abs(f[1e-5] - f[0.0]) <= 0.02
    criterion(5, "gamma=0.1 at least 0.05 below gamma=0; gamma=1e-5 within 0.02", ok,
              ", ".join(f"{g:g}={v:.6f}" for g, v in f.items()))


def test_population_transfer(trained, criterion):
    _, run_dir = trained(gate="cnot")
    report = validate_run(run_dir)
    p11 = report["final_populations"]["p11"]
    criterion(6, "validated CNOT pulses move |10> to |11> with population >= 0.98", p11 >= 0.98,
              f"p11={p11:.6f}")


def test_property_suites(criterion):
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           *(str(TESTS / name) for name in PROPERTY_SUITES)],
                          capture_output=True, text=True)
    elapsed = time.perf_counter() - start
    last = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    criterion(7, "property suites pass without training in under 5 minutes",
              proc.returncode == 0 and elapsed < 300, f"{last}; {elapsed:.0f}s")


def test_determinism(tmp_path, criterion):
    mismatched = []
    for name, cfg in (("closed", RunConfig(epochs=100, seed=7)),
                      ("open", RunConfig(model="lindblad", gamma_abs=1e-2, gamma_em=1e-2, epochs=20, seed=7))):
        out = tmp_path / name
        cfg.out_dir = str(out)
        artifacts.write_run(train(cfg), out)
        first = tmp_path / f"{name}-first"
        shutil.move(out, first)
        artifacts.write_run(train(cfg), out)
        for path in sorted(first.iterdir()):
            if path.name == "timing.json":
                continue
            if path.read_bytes() != (out / path.name).read_bytes():
                mismatched.append(f"{name}/{path.name}")
    criterion(8, "identical seeds give byte-identical artifacts", not mismatched,
              "all files identical" if not mismatched else "differs: " + ", ".join(mismatched))


# --- trained-pulse checks beyond the numbered criteria ------------------------------


@pytest.mark.parametrize("gate", GATE_NAMES)
def test_trained_pulse_consistency(trained, gate):
    record, run_dir = trained(gate=gate)
    report = validate_run(run_dir)
    assert abs(report["state_fidelity"] - record.final_fidelity) <= 0.01
    assert record.final.l_total < record.history[0].l_total


def test_small_noise_comparable_to_noise_free(trained):
    clean = trained(gate="cnot", model="lindblad")[0].final_fidelity
    noisy = trained(gate="cnot", model="lindblad", gamma_abs=1e-5, gamma_em=1e-5)[0].final_fidelity
    assert abs(clean - noisy) <= 0.02


def test_high_omega0_pulses_are_rougher(trained):
    def roughness(run_dir):
        u = artifacts.load_controls(run_dir)[1]
        return np.mean(np.abs(np.diff(u, axis=0)))

    smooth = roughness(trained(gate="cnot")[1])
    rough = roughness(trained(gate="cnot", omega0=50.0)[1])
    assert rough > smooth
