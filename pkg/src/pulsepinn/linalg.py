"""Complex matrices stored as (real, imaginary) pairs.

The parts of a ``CMatrix`` may be plain float arrays, ``Tensor`` nodes on the
array tape, or numpy object arrays of scalar-tape ``Var`` handles. All
arithmetic here is written against the shared operator surface (``+``, ``*``,
``@``), so the same code serves plain evaluation and differentiation.

Matrices may carry leading batch axes: ``re.shape == (..., rows, cols)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff.tensor import Tensor, value_of
from .errors import InvalidDensityMatrix, NotHermitian, ShapeMismatch


def _mode(x) -> str:
    if isinstance(x, Tensor):
        return "differentiable"
    if isinstance(x, np.ndarray) and x.dtype == object:
        return "differentiable"
    return "plain"


def _sqrt(x):
    if isinstance(x, Tensor):
        return x.sqrt()
    if isinstance(x, np.ndarray) and x.dtype != object:
        return np.sqrt(x)
    return x.sqrt() if hasattr(x, "sqrt") else math.sqrt(x)


def _swap(x):
    if isinstance(x, Tensor):
        return x.transpose()
    return np.swapaxes(x, -1, -2)


def _sum_last2(x):
    if isinstance(x, Tensor):
        return x.sum(axis=-1).sum(axis=-1)
    return np.sum(x, axis=(-2, -1))


@dataclass(frozen=True)
class CMatrix:
    re: object
    im: object

    def __post_init__(self):
        if np.shape(self.re) != np.shape(self.im):
            raise ShapeMismatch(f"real part {np.shape(self.re)} vs imaginary part {np.shape(self.im)}")
        if len(np.shape(self.re)) < 2:
            raise ShapeMismatch("a CMatrix needs at least two axes")

    # --- constructors ---------------------------------------------------------

    @classmethod
    def from_complex(cls, a) -> "CMatrix":
        a = np.asarray(a, dtype=complex)
        return cls(a.real.copy(), a.imag.copy())

    @classmethod
    def zeros(cls, rows, cols=None) -> "CMatrix":
        cols = rows if cols is None else cols
        return cls(np.zeros((rows, cols)), np.zeros((rows, cols)))

    @classmethod
    def eye(cls, n) -> "CMatrix":
        return cls(np.eye(n), np.zeros((n, n)))

    # --- properties -----------------------------------------------------------

    @property
    def shape(self):
        return tuple(np.shape(self.re))

    @property
    def rows(self):
        return self.shape[-2]

    @property
    def cols(self):
        return self.shape[-1]

    @property
    def mode(self) -> str:
        return _mode(self.re) if _mode(self.re) == "differentiable" else _mode(self.im)

    def to_complex(self) -> np.ndarray:
        return value_of(self.re) + 1j * value_of(self.im)

    def detach(self) -> "CMatrix":
        return CMatrix(value_of(self.re).copy(), value_of(self.im).copy())

    def __getitem__(self, key) -> "CMatrix":
        """Index the leading batch axes."""
        return CMatrix(self.re[key], self.im[key])

    # --- arithmetic -----------------------------------------------------------

    def _check_same(self, other):
        if self.shape[-2:] != other.shape[-2:]:
            raise ShapeMismatch(f"{self.shape} vs {other.shape}")

    def __add__(self, other: "CMatrix") -> "CMatrix":
        self._check_same(other)
        return CMatrix(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "CMatrix") -> "CMatrix":
        self._check_same(other)
        return CMatrix(self.re - other.re, self.im - other.im)

    def __neg__(self):
        return CMatrix(-self.re, -self.im)

    def scale(self, a, b=0.0) -> "CMatrix":
        """Multiply by the complex scalar ``a + i b`` (parts may be real arrays)."""
        if isinstance(b, (int, float)) and b == 0.0:
            return CMatrix(self.re * a, self.im * a)
        return CMatrix(self.re * a - self.im * b, self.re * b + self.im * a)

    def times_i(self, sign=1) -> "CMatrix":
        """Multiply by ``sign * i`` without arithmetic on the parts."""
        if sign > 0:
            return CMatrix(-self.im, self.re)
        return CMatrix(self.im, -self.re)

    def __matmul__(self, other: "CMatrix") -> "CMatrix":
        if self.cols != other.rows:
            raise ShapeMismatch(f"cannot multiply {self.shape} by {other.shape}")
        return CMatrix(self.re @ other.re - self.im @ other.im,
                       self.re @ other.im + self.im @ other.re)

    def conj(self) -> "CMatrix":
        return CMatrix(self.re, -self.im)

    def transpose(self) -> "CMatrix":
        return CMatrix(_swap(self.re), _swap(self.im))

    def adjoint(self) -> "CMatrix":
        return CMatrix(_swap(self.re), -_swap(self.im))

    def trace(self):
        """(real, imaginary) parts of the trace, batched over leading axes."""
        if self.rows != self.cols:
            raise ShapeMismatch("trace of a non-square matrix")
        n = self.rows
        if isinstance(self.re, Tensor):
            mask = np.eye(n)
            return _sum_last2(self.re * mask), _sum_last2(self.im * mask)
        return (np.trace(self.re, axis1=-2, axis2=-1), np.trace(self.im, axis1=-2, axis2=-1))

    def squared_norm(self):
        """Sum of |a_ij|^2 over the last two axes."""
        return _sum_last2(self.re * self.re + self.im * self.im)

    def frobenius_norm(self):
        return _sqrt(self.squared_norm())


class CVector(CMatrix):
    """A column vector: a CMatrix with a single column.

    Keeping vectors as ``(..., dim, 1)`` matrices lets matrix-vector products
    reuse ``@`` and batch over leading axes.
    """

    @classmethod
    def from_complex(cls, v) -> "CVector":
        v = np.asarray(v, dtype=complex)[..., None]
        return cls(v.real.copy(), v.imag.copy())

    @property
    def dim(self):
        return self.rows

    def to_complex(self) -> np.ndarray:
        return super().to_complex()[..., 0]

    def euclidean_norm(self):
        return self.frobenius_norm()

    def inner(self, other: "CVector"):
        """<self|other> as (real, imaginary) parts."""
        return (_sum_last2(self.re * other.re + self.im * other.im),
                _sum_last2(self.re * other.im - self.im * other.re))


def as_vector(m: CMatrix) -> CVector:
    return CVector(m.re, m.im)


# --- named operations ---------------------------------------------------------


def add(a: CMatrix, b: CMatrix) -> CMatrix:
    return a + b


def scale(a: CMatrix, re, im=0.0) -> CMatrix:
    return a.scale(re, im)


def matmul(a: CMatrix, b: CMatrix) -> CMatrix:
    return a @ b


def matvec(a: CMatrix, v: CVector) -> CVector:
    if a.cols != v.rows:
        raise ShapeMismatch(f"cannot apply {a.shape} to vector of dim {v.rows}")
    return as_vector(a @ v)


def adjoint(a: CMatrix) -> CMatrix:
    return a.adjoint()


def trace(a: CMatrix):
    return a.trace()


def frobenius_norm(a: CMatrix):
    return a.frobenius_norm()


def euclidean_norm(v: CVector):
    return v.frobenius_norm()


def kron(a: CMatrix, b: CMatrix) -> CMatrix:
    """Kronecker product of two plain matrices."""
    ac, bc = a.to_complex(), b.to_complex()
    if a.mode != "plain" or b.mode != "plain":
        raise TypeError("kron is only defined for plain matrices")
    return CMatrix.from_complex(np.kron(ac, bc))


def vec(a: CMatrix) -> CVector:
    """Column-stacking vectorization, batched over leading axes."""
    n, m = a.rows, a.cols
    lead = a.shape[:-2]
    if isinstance(a.re, Tensor):
        re = a.re.transpose().reshape(*lead, n * m, 1)
        im = a.im.transpose().reshape(*lead, n * m, 1)
    else:
        re = np.swapaxes(a.re, -1, -2).reshape(*lead, n * m, 1)
        im = np.swapaxes(a.im, -1, -2).reshape(*lead, n * m, 1)
    return CVector(re, im)


def unvec(v: CMatrix, d: int) -> CMatrix:
    if v.rows != d * d or v.cols != 1:
        raise ShapeMismatch(f"vector of shape {v.shape} does not unvec to {d}x{d}")
    lead = v.shape[:-2]
    if isinstance(v.re, Tensor):
        return CMatrix(v.re.reshape(*lead, d, d).transpose(), v.im.reshape(*lead, d, d).transpose())
    return CMatrix(np.swapaxes(v.re.reshape(*lead, d, d), -1, -2),
                   np.swapaxes(v.im.reshape(*lead, d, d), -1, -2))


def _identity_like(a: CMatrix) -> CMatrix:
    n = a.rows
    return CMatrix(np.broadcast_to(np.eye(n), a.shape).copy(), np.zeros(a.shape))


def default_squarings(a: CMatrix, target=0.5) -> int:
    """Smallest s with max ||A||_F / 2**s <= target (over any batch axes)."""
    norm = float(np.max(np.sqrt(np.sum(value_of(a.re) ** 2 + value_of(a.im) ** 2, axis=(-2, -1)))))
    if norm <= target:
        return 0
    return int(math.ceil(math.log2(norm / target)))


def matexp(a: CMatrix, taylor_order: int = 12, squarings: int | None = None) -> CMatrix:
    """exp(A) by a truncated Taylor series with scaling and squaring.

    The series is evaluated in Horner form, ``I + A(I + A/2(I + ... ))``, and
    every step is an ordinary product or sum, so the result stays on whatever
    tape the parts of ``A`` live on.
    """
    if a.rows != a.cols:
        raise ShapeMismatch("matexp needs a square matrix")
    if taylor_order < 1:
        raise ValueError("taylor_order must be >= 1")
    if squarings is None:
        squarings = default_squarings(a)
    scaled = a.scale(1.0 / 2.0 ** squarings)
    eye = _identity_like(a)
    out = eye + scaled.scale(1.0 / taylor_order)
    for k in range(taylor_order - 1, 0, -1):
        out = eye + (scaled @ out).scale(1.0 / k)
    for _ in range(squarings):
        out = out @ out
    return out


def ordered_product(mats: CMatrix) -> CMatrix:
    """M[n-1] @ ... @ M[1] @ M[0] for a batch ``mats`` along axis 0.

    Adjacent pairs are multiplied level by level, so a batch of N factors costs
    about log2(N) batched products instead of N sequential ones.
    """
    n = mats.shape[0]
    if n == 0:
        raise ValueError("empty product")
    while n > 1:
        half = n // 2
        pairs = mats[1:2 * half:2] @ mats[0:2 * half:2]
        if n % 2:
            tail = mats[n - 1:n]
            if isinstance(pairs.re, Tensor) or isinstance(tail.re, Tensor):
                from .autodiff.tensor import concatenate
                mats = CMatrix(concatenate([pairs.re, tail.re]), concatenate([pairs.im, tail.im]))
            else:
                mats = CMatrix(np.concatenate([pairs.re, tail.re]), np.concatenate([pairs.im, tail.im]))
        else:
            mats = pairs
        n = mats.shape[0]
    return mats[0]


def is_hermitian(a: CMatrix, tol=1e-12) -> bool:
    m = a.to_complex()
    return float(np.linalg.norm(m - m.conj().swapaxes(-1, -2))) < tol


def hermitian_eig(h: CMatrix, tol=1e-10):
    """Eigenvalues (ascending) and eigenvectors of a plain Hermitian matrix."""
    if h.mode != "plain":
        raise TypeError("hermitian_eig works on plain matrices only")
    m = h.to_complex()
    if m.shape[-1] != m.shape[-2] or not is_hermitian(h, tol):
        raise NotHermitian("matrix is not Hermitian within tolerance")
    vals, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    return vals, CMatrix.from_complex(vecs)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    vals, vecs = hermitian_eig(CMatrix.from_complex(m), tol=1e-8)
    vals = np.clip(vals, 0.0, None)
    v = vecs.to_complex()
    return (v * np.sqrt(vals)) @ v.conj().T


def check_density_matrix(rho: CMatrix, tol=1e-8) -> np.ndarray:
    m = rho.to_complex()
    if not is_hermitian(rho, tol):
        raise InvalidDensityMatrix("density matrix is not Hermitian")
    if abs(np.trace(m) - 1.0) > tol:
        raise InvalidDensityMatrix(f"trace {np.trace(m).real:.6g} != 1")
    if np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min() < -tol:
        raise InvalidDensityMatrix("density matrix is not positive semidefinite")
    return m


def uhlmann_fidelity(rho: CMatrix, sigma: CMatrix) -> float:
    """(tr sqrt(sqrt(rho) sigma sqrt(rho)))**2 for two density matrices."""
    r = check_density_matrix(rho)
    s = check_density_matrix(sigma)
    sr = _psd_sqrt(r)
    inner = sr @ s @ sr
    inner = 0.5 * (inner + inner.conj().T)
    vals = np.linalg.eigvalsh(inner)
    if vals.min() < -1e-10:
        raise InvalidDensityMatrix(f"negative eigenvalue {vals.min():.3e} in fidelity kernel")
    f = float(np.sum(np.sqrt(np.clip(vals, 0.0, None))) ** 2)
    return min(max(f, 0.0), 1.0)
