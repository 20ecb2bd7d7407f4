"""Adam, the training loop, sweeps and run configuration."""

import dataclasses
import json

import numpy as np
import pytest

import pulsepinn.trainer as trainer
from pulsepinn.config import RunConfig, SweepConfig, parse_state
from pulsepinn.errors import ConfigError, NonFiniteGradient, NonFiniteValue
from pulsepinn.trainer import AdamState, Problem, TrainingAborted, adam_step, sweep, train

SMALL = dict(n_steps=20, t_final=2.0)


def small(**kw):
    return RunConfig(**{**SMALL, **kw})


# --- Adam ------------------------------------------------------------------


def test_adam_first_step():
    state = AdamState(lr=1e-3)
    (w,) = adam_step(state, [np.array([0.0])], [np.array([2.0])])
    # m_hat = 2, v_hat = 4, step = lr * 2 / (2 + eps)
    assert abs(w[0] - (-1e-3 * 2.0 / (2.0 + 1e-8))) < 1e-18
    assert state.step == 1


def test_adam_zero_gradient_keeps_weights():
    w0 = np.array([1.5, -2.0])
    (w,) = adam_step(AdamState(lr=0.1), [w0], [np.zeros(2)])
    np.testing.assert_array_equal(w, w0)


def test_adam_rejects_nonfinite_gradient():
    with pytest.raises(NonFiniteGradient):
        adam_step(AdamState(), [np.zeros(2)], [np.array([1.0, np.nan])])


def test_adam_moment_shapes():
    state = AdamState()
    weights = [np.zeros((3, 2)), np.zeros(3)]
    adam_step(state, weights, [np.ones((3, 2)), np.ones(3)])
    assert [m.shape for m in state.m] == [(3, 2), (3,)]
    assert [v.shape for v in state.v] == [(3, 2), (3,)]


# --- training ----------------------------------------------------------------


def test_zero_epochs_gives_initial_state():
    rec = train(small(epochs=0))
    assert rec.history == []
    problem = Problem(rec.config)
    total, _, _, _ = problem.losses(problem.new_model(), problem.new_model().parameters())
    assert rec.final.l_total == float(total.data)
    assert rec.controls.shape == (20, 4)


def test_training_reduces_loss_and_records_every_epoch():
    rec = train(small(epochs=30, lr=1e-3))
    assert len(rec.history) == 30
    assert [e.epoch for e in rec.history] == list(range(30))
    assert rec.final.l_total < rec.history[0].l_total
    assert all(0.0 <= e.fidelity <= 1.0 for e in rec.history)


def test_open_training_reduces_loss():
    rec = train(small(model="lindblad", gamma_abs=1e-2, gamma_em=1e-2, epochs=10, lr=1e-3))
    assert rec.final.l_total < rec.history[0].l_total
    assert rec.final.l_trace is not None and rec.final.l_trace < 1e-20
    assert rec.final_operator.shape == (16, 16)


def test_training_is_deterministic():
    a, b = train(small(epochs=5, lr=1e-3, seed=3)), train(small(epochs=5, lr=1e-3, seed=3))
    for p, q in zip(a.model.parameters(), b.model.parameters()):
        assert p.tobytes() == q.tobytes()
    assert [e.l_total for e in a.history] == [e.l_total for e in b.history]


def test_training_abort_keeps_partial_record(monkeypatch):
    calls = {"n": 0}
    original = Problem.losses

    def flaky(self, model, params):
        calls["n"] += 1
        if calls["n"] == 4:
            raise NonFiniteValue("synthetic fault")
        return original(self, model, params)

    monkeypatch.setattr(Problem, "losses", flaky)
    with pytest.raises(TrainingAborted) as info:
        train(small(epochs=10, lr=1e-3))
    rec = info.value.record
    assert rec.status == "aborted" and len(rec.history) == 3
    assert "synthetic fault" in rec.error


# --- sweeps -------------------------------------------------------------------


def test_sweep_grid_size():
    grid_cfg = SweepConfig(base=small(), gates=["cnot", "swap", "cp", "crz", "hh", "qft2"],
                       gammas=[0, 1e-5, 1e-3, 1e-2, 1e-1])
    runs = grid_cfg.expand()
    assert len(runs) == 30
    assert all(r.gamma_abs == r.gamma_em for r in runs)


def test_sweep_empty_axis_rejected():
    with pytest.raises(ConfigError):
        SweepConfig(base=small(), gates=[]).expand()


def test_singleton_sweep_matches_train():
    cfg = small(epochs=3, lr=1e-3)
    (rec,) = sweep(SweepConfig(base=cfg).expand())
    direct = train(cfg)
    assert [e.l_total for e in rec.history] == [e.l_total for e in direct.history]


def test_sweep_parallel_matches_serial():
    cfgs = SweepConfig(base=small(epochs=2, lr=1e-3), seeds=[0, 1]).expand()
    serial, parallel = sweep(cfgs, workers=1), sweep(cfgs, workers=2)
    for a, b in zip(serial, parallel):
        assert a.final.l_total == b.final.l_total


def test_sweep_records_failures(monkeypatch):
    original = trainer.train

    def failing(config, progress_every=0):
        if config.seed == 1:
            raise trainer.TrainingAborted(trainer.TrainRecord(config=config, status="aborted"),
                                          NonFiniteGradient("boom"))
        return original(config)

    monkeypatch.setattr(trainer, "train", failing)
    recs = sweep(SweepConfig(base=small(epochs=1), seeds=[0, 1, 2]).expand())
    assert [r.status for r in recs] == ["ok", "aborted", "ok"]


# --- configuration -------------------------------------------------------------


def test_config_defaults():
    c = RunConfig()
    assert (c.epochs, c.lr, c.n_steps, c.t_final, c.omega0) == (5000, 1e-6, 200, 10.0, 1.0)
    assert (c.activation, c.init, c.loss_weights) == ("sin", "custom", (1.0, 1.0, 1.0))


@pytest.mark.parametrize("field, value", [
    ("gamma_abs", -1.0), ("epochs", -1), ("n_steps", 1), ("gate", "toffoli"),
    ("model", "bloch"), ("activation", "gelu"), ("omega0", 0.0),
    ("x0_override", [[1, 0], [1, 0], [0, 0], [0, 0]]),
])
def test_config_validation_names_field(field, value):
    with pytest.raises(ConfigError) as info:
        RunConfig(**{field: value})
    assert info.value.field == field


def test_config_roundtrip(tmp_path):
    c = RunConfig(gate="swap", gamma_abs=1e-3, x0_override=[[0, 0], [1, 0], [0, 0], [0, 0]], seed=4)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(c.to_dict()))
    assert RunConfig.load(path) == c


def test_unknown_config_field():
    with pytest.raises(ConfigError) as info:
        RunConfig.from_dict({"learning_rate": 1.0})
    assert info.value.field == "learning_rate"


def test_seed_environment_override():
    c = RunConfig(seed=1)
    assert c.with_env({"PULSEPINN_SEED": "42"}).seed == 42
    assert c.with_env({}).seed == 1
    with pytest.raises(ConfigError):
        c.with_env({"PULSEPINN_SEED": "x"})


def test_parse_state_formats():
    s = parse_state(["0.6", "0.8j", 0, [0, 0]])
    np.testing.assert_array_equal(s, [0.6, 0.8j, 0, 0])


def test_x0_override_used_by_problem():
    c = dataclasses.replace(small(), x0_override=[[0, 0], [0, 0], [0, 0], [1, 0]])
    np.testing.assert_array_equal(Problem(c).x0, [0, 0, 0, 1])
