"""
Dense linear-algebra kernel.

Matrices are float64 ``numpy.ndarray``s.  Factorizations go through LAPACK
(``scipy.linalg``): Householder QR (geqrf) and SVD (gesdd).  The accuracy
contracts the rest of the package relies on:

  * QR:   ‖QR − A‖_F ≤ 1e-10‖A‖_F, ‖QᵀQ − I‖_F ≤ 1e-10√n, R_ii ≥ 0
  * R⁻¹:  refused when min|R_ii| ≤ 1e-12·max|R_jj|
  * A⁺:   singular values below 1e-12·σ_max treated as zero
"""
import logging
from dataclasses import dataclass
from typing import TypeAlias

import numpy as np
import numpy.typing as npt
import scipy.linalg as la

from kaczlab.errors import DimensionMismatchError, NonFiniteError, SingularFactorError

log = logging.getLogger(__name__)

DenseMatrix: TypeAlias = npt.NDArray[np.float64]
Vector: TypeAlias = npt.NDArray[np.float64]

SINGULAR_TOL = 1e-12
PINV_RCOND = 1e-12


@dataclass(frozen=True)
class QrFactors:
    """Thin QR factors: q is rows×cols with orthonormal columns, r is upper triangular."""

    q: DenseMatrix
    r: DenseMatrix


# ── Construction helpers ──────────────────────────────────────────────────────

def as_matrix(data, name: str = "matrix") -> DenseMatrix:
    """Return *data* as a finite 2-D float64 array (copying only when needed)."""
    a = np.asarray(data, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"{name} contains NaN or Inf")
    return a


def as_vector(data, name: str = "vector") -> Vector:
    """Return *data* as a finite 1-D float64 array."""
    v = np.asarray(data, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatchError(f"{name} must be 1-D, got ndim={v.ndim}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteError(f"{name} contains NaN or Inf")
    return v


def _require_square(m: DenseMatrix, what: str) -> int:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"{what} must be square, got shape {m.shape}")
    return m.shape[0]


# ── Products ──────────────────────────────────────────────────────────────────

def matvec(a: DenseMatrix, x: Vector) -> Vector:
    """Return A·x."""
    if a.ndim != 2 or x.ndim != 1 or a.shape[1] != x.shape[0]:
        raise DimensionMismatchError(f"cannot multiply {a.shape} by {x.shape}")
    return a @ x


# ── Factorizations ────────────────────────────────────────────────────────────

def householder_qr(a: DenseMatrix) -> QrFactors:
    """
    Thin Householder QR of a tall matrix, sign-normalized so that R_ii ≥ 0.

    The normalization makes the factorization unique for full-column-rank
    input, so Q and R agree across platforms and across sketch/full runs.
    """
    rows, cols = a.shape
    if rows < cols:
        raise DimensionMismatchError(f"QR needs rows >= cols, got {rows}×{cols}")
    q, r = la.qr(a, mode="economic", check_finite=True)
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    q = q * signs
    r = np.triu(r * signs[:, None])
    return QrFactors(q=q, r=r)


def _first_singular_diagonal(r: DenseMatrix, tol: float) -> int | None:
    d = np.abs(np.diag(r))
    if d.size == 0:
        return None
    bad = np.flatnonzero(d <= tol * d.max())
    return int(bad[0]) if bad.size else None


def invert_upper_triangular(r: DenseMatrix, tol: float = SINGULAR_TOL) -> DenseMatrix:
    """
    Inverse of an upper triangular matrix by back substitution.

    Raises SingularFactorError with the first offending diagonal index when
    min|R_ii| ≤ tol·max|R_jj|; callers may fall back to ``pseudoinverse``.
    """
    n = _require_square(r, "triangular factor")
    bad = _first_singular_diagonal(r, tol)
    if bad is not None:
        raise SingularFactorError(bad)
    inv = la.solve_triangular(r, np.eye(n), lower=False)
    return np.triu(inv)


def solve_upper_triangular(r: DenseMatrix, rhs: Vector) -> Vector:
    """Solve R·y = rhs for upper triangular R."""
    n = _require_square(r, "triangular factor")
    if rhs.shape != (n,):
        raise DimensionMismatchError(f"rhs has shape {rhs.shape}, expected ({n},)")
    bad = _first_singular_diagonal(r, SINGULAR_TOL)
    if bad is not None:
        raise SingularFactorError(bad)
    return la.solve_triangular(r, rhs, lower=False)


def pseudoinverse(m: DenseMatrix, rcond: float = PINV_RCOND) -> DenseMatrix:
    """Moore–Penrose pseudoinverse through the SVD with a relative cutoff."""
    _require_square(m, "matrix")
    u, s, vt = la.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros_like(m.T)
    keep = s > rcond * s[0]
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (vt.T * s_inv) @ u.T


# ── Norms and singular values ─────────────────────────────────────────────────

def singular_values(a: DenseMatrix) -> Vector:
    """All singular values of *a* in non-increasing order."""
    if a.size == 0:
        raise DimensionMismatchError("empty matrix has no singular values")
    return la.svdvals(a)


def frobenius_norm(a: DenseMatrix) -> float:
    return float(np.linalg.norm(a, "fro"))


def spectral_norm(a: DenseMatrix) -> float:
    return float(singular_values(a)[0])


def smallest_singular_value(a: DenseMatrix) -> float:
    """σ_min of a tall matrix (zero when it is column-rank deficient)."""
    rows, cols = a.shape
    if rows < cols:
        raise DimensionMismatchError(f"σ_min needs rows >= cols, got {rows}×{cols}")
    return float(singular_values(a)[-1])
