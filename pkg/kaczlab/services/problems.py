"""
Generators for the experiment families.

  gen_random_conditioned   Gaussian-factor SVD synthesis with a geometric spectrum
  add_noise                b + ε, ε ~ N(0, σ²I)
  gen_rff_problem          random-Fourier-feature regression of ``test_function_f``
  gen_parallel_tomo,       tomography systems over a Shepp–Logan phantom
  gen_fan_tomo,            (implemented in services/tomography.py)
  shepp_logan_phantom
  image_error_map          |X* − X̂| / ‖X*‖_F

Every generator that needs randomness takes an ``RngStream``; none keeps state.
"""
import logging
from dataclasses import replace

import numpy as np
import scipy.linalg as la
from pydantic import BaseModel, ConfigDict, Field

from kaczlab.errors import DegenerateInputError, DimensionMismatchError
from kaczlab.models.problem import GeneratedProblem, PhantomImage, ProblemKind
from kaczlab.services.numerics import Vector, householder_qr
from kaczlab.services.sampling import RngStream
from kaczlab.services.tomography import gen_fan_tomo, gen_parallel_tomo, shepp_logan_phantom

log = logging.getLogger(__name__)

__all__ = [
    "TestFunctionParams",
    "add_noise",
    "gen_fan_tomo",
    "gen_parallel_tomo",
    "gen_random_conditioned",
    "gen_rff_problem",
    "image_error_map",
    "shepp_logan_phantom",
    "test_function_f",
]


# ── Random conditioned systems ────────────────────────────────────────────────

def gen_random_conditioned(m: int, n: int, cond_target: float, rng: RngStream) -> GeneratedProblem:
    """
    A = U·diag(s)·Vᵀ with U, V the Q factors of standard Gaussian matrices and
    s geometrically spaced from 1 down to 1/cond_target; x* ~ N(0, I); b = A·x*.
    """
    if n < 2 or m < n:
        raise DimensionMismatchError(f"need m >= n >= 2, got {m}×{n}")
    if cond_target < 1:
        raise ValueError(f"cond_target must be >= 1, got {cond_target}")
    gen = rng.generator
    u = householder_qr(gen.standard_normal((m, n))).q
    v = householder_qr(gen.standard_normal((n, n))).q
    s = np.geomspace(1.0, 1.0 / cond_target, n)
    a = (u * s) @ v.T
    x_star = gen.standard_normal(n)
    return GeneratedProblem(
        a=a,
        b=a @ x_star,
        kind=ProblemKind.random,
        x_star=x_star,
        consistent=True,
        metadata={"m": m, "n": n, "cond_target": float(cond_target), "sigma": 0.0},
    )


def add_noise(problem: GeneratedProblem, sigma: float, rng: RngStream) -> GeneratedProblem:
    """Return a copy with b + ε, ε ~ N(0, σ²I); x* stays the noiseless truth."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    metadata = {**problem.metadata, "sigma": float(sigma)}
    if sigma == 0:
        return replace(problem, metadata=metadata)
    noise = sigma * rng.generator.standard_normal(problem.b.shape[0])
    return replace(problem, b=problem.b + noise, consistent=False, metadata=metadata)


# ── Random Fourier features ───────────────────────────────────────────────────

class TestFunctionParams(BaseModel):
    """Parameters of f(x) = aᵀx + c + α·exp(−(‖x‖ − μ)²/σ_f)."""
    model_config = ConfigDict(frozen=True)

    a: tuple[float, float] = (1.0, 1.0)
    c: float = 1.0
    alpha: float = 0.1
    mu: float = 0.0
    sigma_f: float = Field(1.0, gt=0)


def test_function_f(x: np.ndarray, params: TestFunctionParams | None = None) -> np.ndarray | float:
    """Evaluate the regression target at one 2-vector or at each row of an (m, 2) array."""
    params = params or TestFunctionParams()
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != 2:
        raise DimensionMismatchError(f"test function takes 2-vectors, got shape {x.shape}")
    radius = np.linalg.norm(x, axis=-1)
    value = x @ np.asarray(params.a) + params.c + params.alpha * np.exp(-((radius - params.mu) ** 2) / params.sigma_f)
    return float(value) if value.ndim == 0 else value


def gen_rff_problem(
    m: int,
    d: int,
    sigma: float,
    rng: RngStream,
    params: TestFunctionParams | None = None,
    consistent: bool = False,
) -> GeneratedProblem:
    """
    Sample m points Z uniform on [0,1]², b_j = f(z_j), M ~ N(0, σ²) of size 2×d,
    B = Z·M and A (m×2d) with interleaved columns cos(B_i), sin(B_i).

    With ``consistent=True`` b is replaced by its projection onto range(A) and
    x* is the least-squares solution; otherwise x* is unknown.
    """
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    if m < 2 * d:
        raise DimensionMismatchError(f"need m >= 2d, got m={m}, d={d}")
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    gen = rng.generator
    z = gen.uniform(0.0, 1.0, size=(m, 2))
    b = test_function_f(z, params)
    features = z @ gen.normal(0.0, sigma, size=(2, d))
    a = np.empty((m, 2 * d))
    a[:, 0::2] = np.cos(features)
    a[:, 1::2] = np.sin(features)

    x_ls, *_ = la.lstsq(a, b)
    fitted = a @ x_ls
    ls_residual = float(np.linalg.norm(fitted - b) / np.linalg.norm(b))
    log.debug("RFF system m=%d d=%d sigma=%g: least-squares residual %.3e", m, d, sigma, ls_residual)

    metadata = {"m": m, "d": d, "sigma": float(sigma), "lstsq_residual": ls_residual}
    if consistent:
        return GeneratedProblem(a=a, b=fitted, kind=ProblemKind.rff, x_star=x_ls, consistent=True, metadata=metadata)
    return GeneratedProblem(a=a, b=b, kind=ProblemKind.rff, x_star=None, consistent=False, metadata=metadata)


# ── Image errors ──────────────────────────────────────────────────────────────

def image_error_map(x_star: PhantomImage, x_hat: Vector) -> np.ndarray:
    """Elementwise |X* − X̂| scaled by ‖X*‖_F, as a q×q array."""
    q = x_star.q
    if x_hat.shape != (q * q,):
        raise DimensionMismatchError(f"x_hat has shape {x_hat.shape}, expected ({q * q},)")
    scale = float(np.linalg.norm(x_star.pixels))
    if scale == 0.0:
        raise DegenerateInputError("ground-truth image is identically zero")
    return np.abs(x_star.pixels - x_hat.reshape(q, q)) / scale
