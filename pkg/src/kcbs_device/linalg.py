"""Small-dimension complex linear algebra for kets and Hermitian operators.

Values are immutable wrappers around read-only numpy arrays.  Python's
``complex`` plays the role of the scalar type.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_DIM = 8
STRUCT_TOL = 1e-12
SPECTRAL_TOL = 1e-10


class LinalgError(ValueError):
    """Raised on dimension mismatches or structurally invalid operands."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _check_dim(dim: int) -> None:
    if not 1 <= dim <= MAX_DIM:
        raise LinalgError(f"dimension {dim} outside supported range 1..{MAX_DIM}")


@dataclass(frozen=True, eq=False)
class Ket:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = _frozen(self.amplitudes)
        if a.ndim != 1:
            raise LinalgError("ket amplitudes must be one-dimensional")
        _check_dim(a.shape[0])
        object.__setattr__(self, "amplitudes", a)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def is_normalized(self, tol: float = STRUCT_TOL) -> bool:
        return abs(np.vdot(self.amplitudes, self.amplitudes).real - 1.0) <= tol

    def normalized(self) -> Ket:
        """Unit ket with the first nonzero amplitude made real and nonnegative."""
        nrm = self.norm()
        if nrm == 0.0:
            raise LinalgError("cannot normalize the zero ket")
        a = self.amplitudes / nrm
        nz = np.flatnonzero(np.abs(a) > STRUCT_TOL)
        lead = a[nz[0]]
        a = a * (abs(lead) / lead)
        return Ket(a)

    def __eq__(self, other):
        if not isinstance(other, Ket):
            return NotImplemented
        return np.array_equal(self.amplitudes, other.amplitudes)

    def __hash__(self):
        return hash(self.amplitudes.tobytes())


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise LinalgError(f"operator must be square, got shape {m.shape}")
        _check_dim(m.shape[0])
        if not np.allclose(m, m.conj().T, rtol=0.0, atol=STRUCT_TOL):
            raise LinalgError("matrix is not Hermitian within tolerance")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, dim: int) -> HermitianOperator:
        return cls(np.eye(dim))

    @classmethod
    def zero(cls, dim: int) -> HermitianOperator:
        return cls(np.zeros((dim, dim)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def norm(self) -> float:
        """Spectral norm."""
        return float(np.max(np.abs(eigenvalues(self)))) if self.dim else 0.0

    def _coerce(self, other) -> np.ndarray:
        if not isinstance(other, HermitianOperator):
            raise TypeError(f"expected HermitianOperator, got {type(other).__name__}")
        if other.dim != self.dim:
            raise LinalgError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return other.matrix

    def __add__(self, other):
        return HermitianOperator(self.matrix + self._coerce(other))

    def __sub__(self, other):
        return HermitianOperator(self.matrix - self._coerce(other))

    def __neg__(self):
        return HermitianOperator(-self.matrix)

    def __mul__(self, c):
        c = complex(c)
        if abs(c.imag) > 0:
            raise LinalgError("only real scalars preserve Hermiticity")
        return HermitianOperator(self.matrix * c.real)

    __rmul__ = __mul__

    def __matmul__(self, other) -> np.ndarray:
        # products of Hermitian operators are generally not Hermitian
        return self.matrix @ self._coerce(other)

    def allclose(self, other: HermitianOperator, atol: float = STRUCT_TOL) -> bool:
        return bool(np.allclose(self.matrix, self._coerce(other), rtol=0.0, atol=atol))

    def __eq__(self, other):
        if not isinstance(other, HermitianOperator):
            return NotImplemented
        return np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())


def _as_hermitian(h) -> HermitianOperator:
    if isinstance(h, HermitianOperator):
        return h
    return HermitianOperator(np.asarray(h))


def inner_product(a: Ket, b: Ket) -> complex:
    """<a|b>, antilinear in ``a``."""
    if a.dim != b.dim:
        raise LinalgError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def projector(v: Ket) -> HermitianOperator:
    if not v.is_normalized():
        raise LinalgError("projector requires a normalized ket")
    a = v.amplitudes
    return HermitianOperator(np.outer(a, a.conj()))


def eigenvalues(h) -> np.ndarray:
    """Ascending real spectrum of a Hermitian operator."""
    return np.linalg.eigvalsh(_as_hermitian(h).matrix)


def max_eigenvalue(h) -> float:
    return float(eigenvalues(h)[-1])


def min_eigenvalue(h) -> float:
    return float(eigenvalues(h)[0])


def is_psd(h, tol: float = SPECTRAL_TOL) -> bool:
    return min_eigenvalue(h) >= -tol


def sqrtm_psd(h) -> HermitianOperator:
    """Principal square root of a PSD operator.

    Eigenvalues at roundoff level are set to zero first: their square roots
    would otherwise inject ~1e-8 noise into rank-deficient effects.
    """
    h = _as_hermitian(h)
    w, u = np.linalg.eigh(h.matrix)
    if w[0] < -SPECTRAL_TOL:
        raise LinalgError(f"operator is not PSD (min eigenvalue {w[0]:.3e})")
    w[w <= STRUCT_TOL * max(1.0, float(np.abs(w).max()))] = 0.0
    m = (u * np.sqrt(w)) @ u.conj().T
    return HermitianOperator((m + m.conj().T) / 2)


def operator_sum(ops) -> HermitianOperator:
    ops = list(ops)
    if not ops:
        raise LinalgError("empty operator sum")
    total = ops[0]
    for op in ops[1:]:
        total = total + op
    return total
