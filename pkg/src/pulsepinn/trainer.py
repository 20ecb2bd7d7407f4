"""Adam training loop and parameter sweeps."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .autodiff.tensor import Tensor
from .config import RunConfig
from .errors import DegenerateState, NonFiniteGradient, NonFiniteValue, PulsePinnError
from .linalg import CMatrix
from .losses import closed_terms, open_terms
from .model import PinnModel, TimeGrid, evaluate
from .system import build_collapse_ops, build_system, gate_target

log = logging.getLogger(__name__)


@dataclass
class AdamState:
    lr: float = 1e-6
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    step: int = 0


def adam_step(state: AdamState, weights, gradients):
    """One bias-corrected Adam update; returns the new weight arrays."""
    if len(weights) != len(gradients):
        raise ValueError("weights and gradients differ in length")
    for i, g in enumerate(gradients):
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient in parameter block {i}")
    if not state.m:
        state.m = [np.zeros_like(w) for w in weights]
        state.v = [np.zeros_like(w) for w in weights]
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    out = []
    for i, (w, g) in enumerate(zip(weights, gradients)):
        if g.shape != w.shape:
            raise ValueError(f"gradient shape {g.shape} != weight shape {w.shape}")
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        out.append(w - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon))
    return out


@dataclass
class EpochRecord:
    epoch: int
    l_total: float
    l_model: float
    l_fid: float
    l_trace: float | None
    fidelity: float


@dataclass
class TrainRecord:
    config: RunConfig
    history: list[EpochRecord] = field(default_factory=list)
    final: EpochRecord | None = None
    times: np.ndarray | None = None
    controls: np.ndarray | None = None      # (N, 4)
    states: np.ndarray | None = None        # (N, 4) complex, the learned x(t_k)
    final_operator: np.ndarray | None = None
    model: PinnModel | None = None
    wall_clock_s: float = 0.0
    status: str = "ok"
    error: str | None = None

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def final_fidelity(self) -> float:
        return self.final.fidelity if self.final else float("nan")


class TrainingAborted(PulsePinnError):
    """Training stopped on a numerical fault; ``record`` holds the partial run."""

    def __init__(self, record: TrainRecord, cause: Exception):
        super().__init__(f"training aborted at epoch {len(record.history)}: {cause}")
        self.record = record
        self.cause = cause


class Problem:
    """Everything a training run needs besides the weights."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.grid = TimeGrid(config.n_steps, config.t_final)
        self.system = build_system(config.gamma_abs, config.gamma_em)
        self.target = gate_target(config.gate, config.theta)
        self.x0 = config.x0 if config.x0 is not None else self.target.default_x0.to_complex()
        self.collapse = build_collapse_ops(config.gamma_abs, config.gamma_em)
        self.open = config.model == "lindblad"

    def new_model(self) -> PinnModel:
        c = self.config
        return PinnModel(activation=c.activation, omega0=c.omega0, init_scheme=c.init, seed=c.seed)

    def losses(self, model: PinnModel, params):
        """Weighted total and (l_model, l_fid, l_trace, operator) for ``params``."""
        st = evaluate(model, self.grid.points, self.x0, params)
        w = self.config.loss_weights
        if self.open:
            l_model, l_fid, l_trace, op = open_terms(self.system, st, self.grid,
                                                     self.target.matrix, self.collapse)
            total = l_model * w[0] + l_fid * w[1] + l_trace * w[2]
        else:
            l_model, l_fid, op = closed_terms(self.system, st, self.grid, self.target.matrix)
            l_trace = None
            total = l_model * w[0] + l_fid * w[1]
        return total, (l_model, l_fid, l_trace), op, st

    def record_for(self, epoch, total, parts) -> EpochRecord:
        l_model, l_fid, l_trace = (None if v is None else float(np.asarray(getattr(v, "data", v)))
                                   for v in parts)
        return EpochRecord(epoch, float(np.asarray(getattr(total, "data", total))),
                           l_model, l_fid, l_trace, min(max(1.0 - l_fid, 0.0), 1.0))


def train(config: RunConfig, progress_every: int = 0) -> TrainRecord:
    """Train one pulse network; raises ``TrainingAborted`` on numerical faults."""
    problem = Problem(config)
    model = problem.new_model()
    record = TrainRecord(config=config, model=model)
    adam = AdamState(lr=config.lr)
    start = time.perf_counter()
    try:
        params = model.parameters()
        for epoch in range(config.epochs):
            tape = [Tensor(p, requires_grad=True) for p in params]
            total, parts, _, _ = problem.losses(model, tape)
            total.backward()
            record.history.append(problem.record_for(epoch, total, parts))
            grads = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tape]
            params = adam_step(adam, params, grads)
            model.set_parameters(params)
            if progress_every and (epoch + 1) % progress_every == 0:
                last = record.history[-1]
                log.info("epoch %d loss %.6g fidelity %.6f", epoch + 1, last.l_total, last.fidelity)
        total, parts, op, st = problem.losses(model, model.parameters())
    except (NonFiniteGradient, NonFiniteValue, DegenerateState) as exc:
        record.wall_clock_s = time.perf_counter() - start
        record.status = "aborted"
        record.error = f"{type(exc).__name__}: {exc}"
        raise TrainingAborted(record, exc) from exc
    record.final = problem.record_for(config.epochs, total, parts)
    record.times = problem.grid.points
    record.controls = st.u.data.copy()
    record.states = st.x_re.data + 1j * st.x_im.data
    record.final_operator = op.to_complex() if isinstance(op, CMatrix) else np.asarray(op)
    record.wall_clock_s = time.perf_counter() - start
    return record


def _train_quietly(config: RunConfig) -> TrainRecord:
    try:
        return train(config)
    except TrainingAborted as exc:
        return exc.record
    except PulsePinnError as exc:
        return TrainRecord(config=config, status="failed", error=f"{type(exc).__name__}: {exc}")


def sweep(configs: list[RunConfig], workers: int = 1) -> list[TrainRecord]:
    """Train every configuration; failures are recorded and the sweep continues."""
    if not configs:
        raise ValueError("empty sweep grid")
    workers = max(1, min(workers, len(configs)))
    if workers == 1:
        return [_train_quietly(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_train_quietly, configs))
