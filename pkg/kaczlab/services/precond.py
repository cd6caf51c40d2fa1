"""
Right preconditioners for the Kaczmarz iteration and
the conditioning diagnostics that explain their effect.

Only ``build_sketched_preconditioner`` and ``apply_right`` belong to the solve
path; they touch nothing but sampled rows.  ``exact_preconditioner``,
``kappa_f``, ``condition_number`` and ``coherence`` read a full matrix and are
meant for tests and offline analysis.
"""
import logging
import time

import numpy as np

from kaczlab.errors import (
    ConditioningOverflowError,
    DimensionMismatchError,
    NonFiniteError,
    SingularFactorError,
)
from kaczlab.models.preconditioner import SketchedPreconditioner
from kaczlab.services.clocks import (
    Clock,
    charge,
    pseudoinverse_flops,
    qr_flops,
    triangular_inverse_flops,
)
from kaczlab.services.numerics import (
    SINGULAR_TOL,
    DenseMatrix,
    Vector,
    frobenius_norm,
    householder_qr,
    invert_upper_triangular,
    pseudoinverse,
    singular_values,
    solve_upper_triangular,
)
from kaczlab.services.sampling import RngStream, RowSource, sample_sketch_indices, sketch_size

log = logging.getLogger(__name__)

# σ_min below this fraction of σ_max makes κ_F / k(A) meaningless.
CONDITIONING_FLOOR = 1e-14


# ── Construction ──────────────────────────────────────────────────────────────

def build_sketched_preconditioner(
    source: RowSource,
    gamma: float,
    rng: RngStream,
    clock: Clock = time.perf_counter,
) -> SketchedPreconditioner:
    """
    Sample r = clamp(⌈γn⌉, n, m) rows, factor Â = Q̂R̂ and return P̂_R = R̂⁻¹.

    A singular R̂ falls back to its pseudoinverse.  ``build_seconds`` covers
    sampling, gathering, QR and inversion.
    """
    m, n = source.row_count, source.col_count
    if gamma < 1:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    if m < n:
        raise DimensionMismatchError(f"system must be overdetermined, got {m}×{n}")

    started = clock()
    r = sketch_size(gamma, n, m)
    indices = sample_sketch_indices(m, r, rng)
    a_hat, _ = source.rows(indices)
    if not np.all(np.isfinite(a_hat)):
        raise NonFiniteError("sampled rows contain NaN or Inf")
    r_hat = householder_qr(a_hat).r
    used_pinv = False
    try:
        p = invert_upper_triangular(r_hat)
    except SingularFactorError as exc:
        log.warning(
            "Sketched R is singular at diagonal %d (gamma=%g, r=%d); using pseudoinverse",
            exc.index, gamma, r,
        )
        p = pseudoinverse(r_hat)
        used_pinv = True
    charge(clock, build_flops(r, n, used_pinv))
    build_seconds = clock() - started

    log.info("Built sketched preconditioner: n=%d gamma=%g r=%d in %.3fs", n, gamma, r, build_seconds)
    return SketchedPreconditioner(
        p=p,
        gamma=float(gamma),
        r=r,
        indices=tuple(int(i) for i in indices),
        used_pseudoinverse=used_pinv,
        build_seconds=build_seconds,
    )


def build_flops(r: int, n: int, used_pseudoinverse: bool = False) -> float:
    """Operation count of a build: row gather, QR of the r×n sketch and the inverse."""
    inverse = pseudoinverse_flops(n) if used_pseudoinverse else triangular_inverse_flops(n)
    return r * n + qr_flops(r, n) + inverse


def exact_preconditioner(a: DenseMatrix) -> DenseMatrix:
    """P*_R = R⁻¹ from the QR factorization of the full matrix."""
    return invert_upper_triangular(householder_qr(a).r)


# ── Use in the iteration ──────────────────────────────────────────────────────

def apply_right(p: SketchedPreconditioner, row: Vector) -> Vector:
    """Transformed row ã = a·P̂_R."""
    if row.shape != (p.n,):
        raise DimensionMismatchError(f"row has shape {row.shape}, expected ({p.n},)")
    return row @ p.p


def to_preconditioned_space(p: SketchedPreconditioner, x: Vector) -> Vector:
    """
    y with P̂_R·y = x: a triangular solve, or the least-squares solution via the
    pseudoinverse when P̂_R came from the fallback path.
    """
    if x.shape != (p.n,):
        raise DimensionMismatchError(f"x has shape {x.shape}, expected ({p.n},)")
    if not p.used_pseudoinverse:
        try:
            return solve_upper_triangular(p.p, x)
        except SingularFactorError:
            pass
    return pseudoinverse(p.p) @ x


# ── Diagnostics ───────────────────────────────────────────────────────────────

def _extreme_singular_values(a: DenseMatrix) -> tuple[float, float]:
    rows, cols = a.shape
    if rows < cols:
        raise DimensionMismatchError(f"expected a tall matrix, got {rows}×{cols}")
    s = singular_values(a)
    s_max, s_min = float(s[0]), float(s[-1])
    if s_max == 0.0 or s_min < CONDITIONING_FLOOR * s_max:
        raise ConditioningOverflowError(f"σ_min={s_min:.3e} is negligible against σ_max={s_max:.3e}")
    return s_max, s_min


def kappa_f(a: DenseMatrix) -> float:
    """Scaled condition number κ_F(A) = ‖A‖_F / σ_min(A)."""
    _, s_min = _extreme_singular_values(a)
    return frobenius_norm(a) / s_min


def condition_number(a: DenseMatrix) -> float:
    """Spectral condition number k(A) = σ_max / σ_min."""
    s_max, s_min = _extreme_singular_values(a)
    return s_max / s_min


def coherence(a: DenseMatrix) -> float:
    """μ(A): the largest squared row norm of the thin Q factor."""
    factors = householder_qr(a)
    d = np.abs(np.diag(factors.r))
    if d.size == 0 or d.max() == 0.0:
        raise SingularFactorError(0, "coherence undefined for a zero matrix")
    bad = np.flatnonzero(d <= SINGULAR_TOL * d.max())
    if bad.size:
        raise SingularFactorError(int(bad[0]), "coherence undefined for a rank-deficient matrix")
    return float(np.max(np.einsum("ij,ij->i", factors.q, factors.q)))
