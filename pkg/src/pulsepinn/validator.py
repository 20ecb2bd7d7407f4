"""Independent re-simulation of learned pulses.

Discrete control samples are turned into continuous functions with a natural
cubic spline and fed to fixed-step RK4 integrators of the Schrödinger and
Lindblad equations. Nothing here touches the network or the training tape.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import TooFewSamples
from .linalg import CMatrix, uhlmann_fidelity
from .losses import liouvillian_parts
from .model import TimeGrid
from .system import SystemSpec, build_system

log = logging.getLogger(__name__)

DEFAULT_SUBSTEPS = 10


@dataclass(frozen=True)
class PulseSchedule:
    grid: TimeGrid
    samples: np.ndarray  # (N, n_controls)
    spline: CubicSpline

    def __call__(self, t):
        """Control amplitudes at time(s) ``t``; clamped outside the sample range."""
        knots = self.grid.points
        return self.spline(np.clip(t, knots[0], knots[-1]))


def build_spline(samples, grid: TimeGrid) -> PulseSchedule:
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[0] < 3:
        raise TooFewSamples(f"need at least 3 samples, got {samples.shape[0]}")
    if samples.shape[0] != grid.n:
        raise ValueError(f"{samples.shape[0]} samples for a grid of {grid.n} points")
    return PulseSchedule(grid, samples, CubicSpline(grid.points, samples, axis=0, bc_type="natural"))


def rk4_integrate(rhs, y0, t0: float, dt: float, n_intervals: int, substeps: int = DEFAULT_SUBSTEPS,
                  after_step=None):
    """Classic RK4 from ``t0``; returns the state at t0 + k*dt for k = 0..n_intervals.

    ``after_step(y)`` may project the state after each substep and must
    return the (possibly corrected) state.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    h = dt / substeps
    y = np.array(y0, dtype=complex)
    out = [y.copy()]
    for k in range(n_intervals):
        base = t0 + k * dt
        for s in range(substeps):
            t = base + s * h
            k1 = rhs(t, y)
            k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if after_step is not None:
                y = after_step(y)
        out.append(y.copy())
    return np.array(out)


@dataclass
class EvolutionResult:
    times: np.ndarray
    populations: np.ndarray            # (len(times), d)
    states: np.ndarray | None = None   # (len(times), d) complex
    densities: np.ndarray | None = None  # (len(times), d, d) complex
    target_fidelity: float | None = None
    max_norm_deviation: float = 0.0    # |‖x‖-1| or |tr ρ - 1|
    min_eigenvalue: float | None = None
    max_hermitian_correction: float = 0.0

    @property
    def final_density(self) -> np.ndarray:
        if self.densities is not None:
            return self.densities[-1]
        x = self.states[-1]
        return np.outer(x, x.conj())


def _output_times(grid: TimeGrid) -> np.ndarray:
    return np.arange(grid.n + 1) * grid.dt


def rk4_schrodinger(sys: SystemSpec, schedule: PulseSchedule, x0, substeps: int = DEFAULT_SUBSTEPS,
                    target: np.ndarray | None = None) -> EvolutionResult:
    """Integrate dx/dt = -i H(t) x over [0, T] without renormalizing."""
    drift = sys.drift.to_complex()
    ctrl = sys.control_stack

    def rhs(t, x):
        u = schedule(t)
        h = drift + np.tensordot(u, ctrl, axes=1)
        return -1j * (h @ x)

    grid = schedule.grid
    x0 = np.asarray(x0, dtype=complex).reshape(-1)
    states = rk4_integrate(rhs, x0, 0.0, grid.dt, grid.n, substeps)
    norms = np.linalg.norm(states, axis=1)
    result = EvolutionResult(times=_output_times(grid), populations=np.abs(states) ** 2,
                             states=states, max_norm_deviation=float(np.max(np.abs(norms - 1.0))))
    if target is not None:
        expected = np.asarray(target) @ x0
        result.target_fidelity = float(abs(np.vdot(expected, states[-1])) ** 2)
    return result


def lindblad_evolve(generator, rho0: np.ndarray, t0: float, dt: float, n_intervals: int,
                    substeps: int = DEFAULT_SUBSTEPS) -> tuple[np.ndarray, float]:
    """RK4 on vec(rho)' = L(t) vec(rho), re-Hermitizing after every substep.

    ``generator(t)`` returns the d^2 x d^2 superoperator. Returns the density
    matrices at the interval boundaries and the largest Hermitian correction.
    """
    d = rho0.shape[0]
    worst = 0.0

    def rhs(t, v):
        return generator(t) @ v

    def hermitize(v):
        nonlocal worst
        rho = v.reshape(d, d).T
        sym = 0.5 * (rho + rho.conj().T)
        worst = max(worst, float(np.max(np.abs(sym - rho))))
        return sym.T.reshape(-1)

    v0 = np.asarray(rho0, dtype=complex).T.reshape(-1)
    vs = rk4_integrate(rhs, v0, t0, dt, n_intervals, substeps, after_step=hermitize)
    return np.swapaxes(vs.reshape(-1, d, d), -1, -2), worst


def rk4_lindblad(sys: SystemSpec, schedule: PulseSchedule, rho0, collapse=(),
                 substeps: int = DEFAULT_SUBSTEPS, target: np.ndarray | None = None) -> EvolutionResult:
    rho0 = rho0.to_complex() if isinstance(rho0, CMatrix) else np.asarray(rho0, dtype=complex)

    base, ctrl = liouvillian_parts(sys, collapse)

    def generator(t):
        return base + np.tensordot(schedule(t), ctrl, axes=1)

    grid = schedule.grid
    rhos, worst = lindblad_evolve(generator, rho0, 0.0, grid.dt, grid.n, substeps)
    if worst > 1e-10:
        log.warning("Hermitian re-symmetrization moved entries by %.3e", worst)
    traces = np.trace(rhos, axis1=1, axis2=2)
    min_eig = min(float(np.linalg.eigvalsh(r).min()) for r in rhos)
    result = EvolutionResult(times=_output_times(grid),
                             populations=np.real(np.diagonal(rhos, axis1=1, axis2=2)),
                             densities=rhos, max_norm_deviation=float(np.max(np.abs(traces - 1.0))),
                             min_eigenvalue=min_eig, max_hermitian_correction=worst)
    if target is not None:
        u = np.asarray(target)
        expected = u @ rho0 @ u.conj().T
        result.target_fidelity = uhlmann_fidelity(CMatrix.from_complex(expected),
                                                  CMatrix.from_complex(_nearest_density(rhos[-1])))
    return result


def _nearest_density(rho: np.ndarray) -> np.ndarray:
    """Project onto unit-trace PSD matrices to absorb O(h^4) integrator drift."""
    rho = 0.5 * (rho + rho.conj().T)
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    return (v * (w / w.sum())) @ v.conj().T


def crosscheck(closed: PulseSchedule, open_gamma0: PulseSchedule, x0,
               sys: SystemSpec | None = None, substeps: int = DEFAULT_SUBSTEPS) -> float:
    """Uhlmann fidelity between final states evolved (noise-free) under two pulse sets."""
    sys = build_system() if sys is None else sys
    x0 = np.asarray(x0, dtype=complex).reshape(-1)
    rho0 = np.outer(x0, x0.conj())
    a = rk4_lindblad(sys, closed, rho0, (), substeps).densities[-1]
    b = rk4_lindblad(sys, open_gamma0, rho0, (), substeps).densities[-1]
    return uhlmann_fidelity(CMatrix.from_complex(_nearest_density(a)),
                            CMatrix.from_complex(_nearest_density(b)))
