"""Two-qubit Heisenberg system, dissipators, Liouvillian and target gates.

Basis ordering is |00>, |01>, |10>, |11> with qubit 1 as the left tensor
factor. Vectorization is column stacking throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NegativeRate, ShapeMismatch, UnknownGate
from .linalg import CMatrix, CVector, is_hermitian

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
S_I = 0.5 * SIGMA_0

# ground state |g> is basis index 0, excited |e> is index 1
SIGMA_GE = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e|
SIGMA_EG = np.array([[0, 0], [1, 0]], dtype=complex)  # |e><g|

N_CONTROLS = 4
DIM = 4


def pauli(name: str) -> CMatrix:
    return CMatrix.from_complex({"0": SIGMA_0, "i": SIGMA_0, "x": SIGMA_X,
                                 "y": SIGMA_Y, "z": SIGMA_Z}[name.lower()])


@dataclass(frozen=True)
class SystemSpec:
    drift: CMatrix
    controls: tuple[CMatrix, ...]
    gamma_abs: float = 0.0
    gamma_em: float = 0.0
    _stacked: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for op in (self.drift, *self.controls):
            if not is_hermitian(op):
                raise ValueError("drift and control operators must be Hermitian")
        stacked = np.stack([c.to_complex() for c in self.controls])
        object.__setattr__(self, "_stacked", stacked)

    @property
    def n_controls(self) -> int:
        return len(self.controls)

    @property
    def control_stack(self) -> np.ndarray:
        """Controls as a complex (n_controls, 4, 4) array."""
        return self._stacked

    def collapse_ops(self) -> list[CMatrix]:
        return build_collapse_ops(self.gamma_abs, self.gamma_em)


def build_system(gamma_abs: float = 0.0, gamma_em: float = 0.0) -> SystemSpec:
    drift = 0.5 * (np.kron(SIGMA_X, SIGMA_X) + np.kron(SIGMA_Y, SIGMA_Y) + np.kron(SIGMA_Z, SIGMA_Z))
    controls = (np.kron(SIGMA_X, S_I), np.kron(SIGMA_Y, S_I),
                np.kron(S_I, SIGMA_X), np.kron(S_I, SIGMA_Y))
    if gamma_abs < 0 or gamma_em < 0:
        raise NegativeRate(f"rates must be nonnegative, got {gamma_abs}, {gamma_em}")
    return SystemSpec(CMatrix.from_complex(drift),
                      tuple(CMatrix.from_complex(c) for c in controls),
                      float(gamma_abs), float(gamma_em))


def total_hamiltonian(sys: SystemSpec, u) -> CMatrix:
    """H = H_d + sum_j u_j H_c^(j).

    ``u`` may have shape (4,) or (N, 4); it may also be a ``Tensor``, in which
    case the result is differentiable in the controls.
    """
    n = sys.n_controls
    stack_re = sys.control_stack.real.reshape(n, DIM * DIM)
    stack_im = sys.control_stack.imag.reshape(n, DIM * DIM)
    if np.shape(u)[-1] != n:
        raise ShapeMismatch(f"expected {n} control amplitudes, got shape {np.shape(u)}")
    lead = tuple(np.shape(u)[:-1])
    re = (u @ stack_re).reshape(*lead, DIM, DIM)
    im = (u @ stack_im).reshape(*lead, DIM, DIM)
    return CMatrix(sys.drift.re + re, sys.drift.im + im)


def build_collapse_ops(gamma_abs: float, gamma_em: float) -> list[CMatrix]:
    if gamma_abs < 0 or gamma_em < 0:
        raise NegativeRate(f"rates must be nonnegative, got {gamma_abs}, {gamma_em}")
    a, e = math.sqrt(gamma_abs), math.sqrt(gamma_em)
    ops = [a * np.kron(SIGMA_EG, SIGMA_0), e * np.kron(SIGMA_GE, SIGMA_0),
           a * np.kron(SIGMA_0, SIGMA_EG), e * np.kron(SIGMA_0, SIGMA_GE)]
    return [CMatrix.from_complex(c) for c in ops]


def build_liouvillian(h: CMatrix, collapse=()) -> CMatrix:
    """Lindblad generator acting on column-stacked density matrices."""
    hm = h.to_complex()
    d = hm.shape[-1]
    if hm.shape != (d, d):
        raise ShapeMismatch("Hamiltonian must be a single square matrix")
    eye = np.eye(d)
    out = -1j * (np.kron(eye, hm) - np.kron(hm.T, eye))
    for c in collapse:
        cm = c.to_complex()
        if cm.shape != (d, d):
            raise ShapeMismatch(f"collapse operator of shape {cm.shape} for dimension {d}")
        cdc = cm.conj().T @ cm
        out += np.kron(cm.conj(), cm) - 0.5 * np.kron(eye, cdc) - 0.5 * np.kron(cdc.T, eye)
    return CMatrix.from_complex(out)


def apply_lindblad(h: np.ndarray, collapse, rho: np.ndarray) -> np.ndarray:
    """-i[H, rho] + sum (C rho C^+ - {C^+ C, rho}/2), on complex arrays."""
    out = -1j * (h @ rho - rho @ h)
    for c in collapse:
        cm = c.to_complex() if isinstance(c, CMatrix) else c
        cdc = cm.conj().T @ cm
        out = out + cm @ rho @ cm.conj().T - 0.5 * (cdc @ rho + rho @ cdc)
    return out


def pauli_basis_2q() -> list[CMatrix]:
    singles = [SIGMA_0, SIGMA_X, SIGMA_Y, SIGMA_Z]
    return [CMatrix.from_complex(np.kron(a, b)) for a in singles for b in singles]


# --- target gates ---------------------------------------------------------------

GATE_NAMES = ("cnot", "swap", "qft2", "hh", "crz", "cp")

_DEFAULT_X0 = {"cnot": 2, "crz": 2, "cp": 2, "swap": 1, "hh": 0, "qft2": 1}


@dataclass(frozen=True)
class GateTarget:
    name: str
    theta: float
    matrix: CMatrix
    default_x0: CVector


def gate_matrix(name: str, theta: float | None = None) -> np.ndarray:
    key = name.lower()
    if key == "cnot":
        return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    if key == "swap":
        return np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
    if key == "qft2":
        j, k = np.meshgrid(range(4), range(4), indexing="ij")
        return 0.5 * (1j ** (j * k))
    if key == "hh":
        had = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
        return np.kron(had, had)
    theta = math.pi if theta is None else theta
    if key == "crz":
        return np.diag([1, 1, np.exp(-0.5j * theta), np.exp(0.5j * theta)])
    if key == "cp":
        return np.diag([1, 1, 1, np.exp(1j * theta)])
    raise UnknownGate(name)


def gate_target(name: str, theta: float | None = None) -> GateTarget:
    key = name.lower()
    if key not in GATE_NAMES:
        raise UnknownGate(name)
    u = gate_matrix(key, theta)
    x0 = np.zeros(DIM, dtype=complex)
    x0[_DEFAULT_X0[key]] = 1.0
    theta = math.pi if theta is None else float(theta)
    return GateTarget(key, theta, CMatrix.from_complex(u), CVector.from_complex(x0))
