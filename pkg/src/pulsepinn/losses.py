"""Loss terms for the Schrödinger and Lindblad pulse networks.

Every ``*_terms`` function accepts either plain arrays or tape Tensors and
returns the same kind, so training and evaluation share one code path. The
public functions taking a ``PinnModel`` return plain floats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff.tensor import Tensor, value_of
from .errors import NonPhysicalFidelity
from .linalg import CMatrix, CVector, matexp, ordered_product, unvec, vec
from .model import AnsatzState, PinnModel, TimeGrid, evaluate
from .system import DIM, SystemSpec, build_liouvillian, pauli_basis_2q, total_hamiltonian


@dataclass(frozen=True)
class ClosedLossBreakdown:
    l_model: float
    l_fid: float
    l_total: float

    @property
    def fidelity(self) -> float:
        return 1.0 - self.l_fid


@dataclass(frozen=True)
class OpenLossBreakdown:
    l_model: float
    l_fid: float
    l_trace: float
    l_total: float

    @property
    def fidelity(self) -> float:
        return 1.0 - self.l_fid


def _mean(x):
    return x.mean() if isinstance(x, Tensor) else float(np.mean(x))


def _sum_last2(x):
    if isinstance(x, Tensor):
        return x.sum(axis=-1).sum(axis=-1)
    return np.sum(x, axis=(-2, -1))


# --- closed system ------------------------------------------------------------


def step_propagators(sys: SystemSpec, controls, dt: float) -> CMatrix:
    """exp(-i H(t_k) dt) for every row of ``controls``; shape (N, 4, 4)."""
    h = total_hamiltonian(sys, controls)
    generator = CMatrix(h.im * dt, h.re * (-dt))  # -i H dt
    return matexp(generator)


def propagator_product(sys: SystemSpec, controls, grid: TimeGrid, return_steps=False):
    """U_N = prod_k exp(-i H(t_k) dt) applied right to left, starting from I."""
    if np.shape(controls)[0] == 0:
        eye = CMatrix.eye(DIM)
        return (eye, None) if return_steps else eye
    steps = step_propagators(sys, controls, grid.dt)
    final = ordered_product(steps)
    return (final, steps) if return_steps else final


def schrodinger_residual_terms(sys: SystemSpec, x: CVector, dx: CVector, u):
    """Mean over time of ||dx + i H x||^2."""
    hx = total_hamiltonian(sys, u) @ x
    res_re = dx.re - hx.im
    res_im = dx.im + hx.re
    per_step = _sum_last2(res_re * res_re + res_im * res_im)
    return _mean(per_step)


def unitary_fidelity_terms(u_targ: CMatrix, u: CMatrix):
    """|tr(U_targ U^+)|^2 / d^2 on split parts."""
    tr_re = _sum_last2(u_targ.re * u.re + u_targ.im * u.im)
    tr_im = _sum_last2(u_targ.im * u.re - u_targ.re * u.im)
    d = u.rows
    return (tr_re * tr_re + tr_im * tr_im) * (1.0 / d ** 2)


def unitary_process_fidelity(u_targ: CMatrix, u: CMatrix) -> float:
    return float(value_of(unitary_fidelity_terms(u_targ.detach(), u.detach())))


def closed_model_loss(sys: SystemSpec, model: PinnModel, grid: TimeGrid, x0) -> float:
    st = evaluate(model, grid.points, _x0_array(x0))
    return float(value_of(schrodinger_residual_terms(sys, st.x, st.dx, st.u)))


def closed_terms(sys, st: AnsatzState, grid: TimeGrid, u_targ: CMatrix):
    """(l_model, l_fid, final propagator) for one ansatz evaluation."""
    l_model = schrodinger_residual_terms(sys, st.x, st.dx, st.u)
    final = propagator_product(sys, st.u, grid)
    l_fid = 1.0 - unitary_fidelity_terms(u_targ, final)
    return l_model, l_fid, final


def closed_total_loss(sys, model, grid, x0, u_targ: CMatrix, weights=(1.0, 1.0)) -> ClosedLossBreakdown:
    st = evaluate(model, grid.points, _x0_array(x0))
    l_model, l_fid, _ = closed_terms(sys, st, grid, u_targ)
    l_model, l_fid = float(value_of(l_model)), float(value_of(l_fid))
    return ClosedLossBreakdown(l_model, l_fid, weights[0] * l_model + weights[1] * l_fid)


# --- open system --------------------------------------------------------------


def density_and_derivative(x: CVector, dx: CVector):
    """rho = x x^+ and its product-rule derivative, batched."""
    rho = x @ x.adjoint()
    drho = dx @ x.adjoint() + x @ dx.adjoint()
    return rho, drho


def liouvillian_parts(sys: SystemSpec, collapse):
    """Drift-plus-dissipator superoperator and the per-control commutator superoperators."""
    base = build_liouvillian(sys.drift, collapse).to_complex()
    ctrl = np.stack([build_liouvillian(c).to_complex() for c in sys.controls])
    return base, ctrl


def liouvillian_batch(sys: SystemSpec, controls, collapse) -> CMatrix:
    """L(t_k) for every row of ``controls``; shape (N, 16, 16).

    The generator is affine in the Hamiltonian, so L_k is the drift-plus-
    dissipator superoperator plus u_jk times each control's commutator
    superoperator.
    """
    base, ctrl = liouvillian_parts(sys, collapse)
    n = len(sys.controls)
    d2 = base.shape[0]
    lead = tuple(np.shape(controls)[:-1])
    re = (controls @ ctrl.real.reshape(n, d2 * d2)).reshape(*lead, d2, d2)
    im = (controls @ ctrl.imag.reshape(n, d2 * d2)).reshape(*lead, d2, d2)
    return CMatrix(base.real + re, base.imag + im)


def lindblad_residual_terms(sys, rho: CMatrix, drho: CMatrix, u, collapse):
    """Mean over time of ||drho - unvec(L vec rho)||_F^2."""
    gen = liouvillian_batch(sys, u, collapse)
    rhs = unvec(gen @ vec(rho), rho.rows)
    diff = drho - rhs
    return _mean(diff.squared_norm())


def trace_terms(rho: CMatrix):
    tr_re, tr_im = rho.trace()
    dev = tr_re - 1.0
    return _mean(dev * dev + tr_im * tr_im)


def channel_trotter(sys: SystemSpec, controls, collapse, grid: TimeGrid) -> CMatrix:
    """E_tot = exp(dt L_{N-1}) ... exp(dt L_0)."""
    d2 = DIM * DIM
    if np.shape(controls)[0] == 0:
        return CMatrix.eye(d2)
    gen = liouvillian_batch(sys, controls, collapse)
    return ordered_product(matexp(gen.scale(grid.dt)))


def _pauli_fidelity_kernel(u_targ: np.ndarray):
    """Constant matrices turning E_tot into the Pauli-basis trace sum.

    Column P of ``basis`` is vec(P); row P of ``weights`` is vec(B_P^T) with
    B_P = U P^+ U^+, so that tr(B_P E(P)) = weights[P] . (E basis)[:, P].
    """
    paulis = [p.to_complex() for p in pauli_basis_2q()]
    basis = np.stack([p.T.reshape(-1) for p in paulis], axis=1)
    weights = np.stack([(u_targ @ p.conj().T @ u_targ.conj().T).reshape(-1) for p in paulis])
    return basis, weights


def process_fidelity_terms(e_tot: CMatrix, u_targ: np.ndarray):
    """Real part of (1/d^3) sum_P tr(U P^+ U^+ E(P)), for any backend."""
    basis, weights = _pauli_fidelity_kernel(u_targ)
    applied = e_tot @ CMatrix.from_complex(basis)            # columns vec(E(P))
    # sum_{P,k} weights[P,k] * applied[k,P], real part
    acc = _sum_last2(applied.re * weights.real.T - applied.im * weights.imag.T)
    return acc * (1.0 / DIM ** 3)


def open_process_fidelity(e_tot: CMatrix, u_targ: CMatrix) -> float:
    """Pauli-basis process fidelity of a 16x16 channel against a unitary."""
    e = e_tot.to_complex()
    u = u_targ.to_complex()
    acc = 0.0 + 0.0j
    for p in pauli_basis_2q():
        pm = p.to_complex()
        image = unvec(CVector.from_complex(e @ pm.T.reshape(-1)), DIM).to_complex()
        acc += np.trace(u @ pm.conj().T @ u.conj().T @ image)
    f = acc / DIM ** 3
    if abs(f.imag) > 1e-8:
        raise NonPhysicalFidelity(f"imaginary part {f.imag:.3e}")
    if not -1e-6 <= f.real <= 1 + 1e-6:
        raise NonPhysicalFidelity(f"fidelity {f.real:.6g} outside [0, 1]")
    return float(min(max(f.real, 0.0), 1.0))


def open_terms(sys, st: AnsatzState, grid: TimeGrid, u_targ: CMatrix, collapse):
    """(l_model, l_fid, l_trace, E_tot) for one ansatz evaluation."""
    rho, drho = density_and_derivative(st.x, st.dx)
    l_model = lindblad_residual_terms(sys, rho, drho, st.u, collapse)
    l_trace = trace_terms(rho)
    e_tot = channel_trotter(sys, st.u, collapse, grid)
    l_fid = 1.0 - process_fidelity_terms(e_tot, u_targ.to_complex())
    return l_model, l_fid, l_trace, e_tot


def open_model_loss(sys, model, grid, x0, collapse) -> float:
    st = evaluate(model, grid.points, _x0_array(x0))
    rho, drho = density_and_derivative(st.x, st.dx)
    return float(value_of(lindblad_residual_terms(sys, rho, drho, st.u, collapse)))


def trace_loss(model, grid, x0) -> float:
    st = evaluate(model, grid.points, _x0_array(x0))
    rho, _ = density_and_derivative(st.x, st.dx)
    return float(value_of(trace_terms(rho)))


def open_total_loss(sys, model, grid, x0, u_targ: CMatrix, collapse,
                    weights=(1.0, 1.0, 1.0)) -> OpenLossBreakdown:
    st = evaluate(model, grid.points, _x0_array(x0))
    l_model, l_fid, l_trace, _ = open_terms(sys, st, grid, u_targ, collapse)
    l_model, l_fid, l_trace = (float(value_of(v)) for v in (l_model, l_fid, l_trace))
    total = weights[0] * l_model + weights[1] * l_fid + weights[2] * l_trace
    return OpenLossBreakdown(l_model, l_fid, l_trace, total)


def _x0_array(x0) -> np.ndarray:
    if isinstance(x0, CMatrix):
        return x0.to_complex().reshape(-1)
    return np.asarray(x0, dtype=complex).reshape(-1)
