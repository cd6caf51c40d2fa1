"""
Shepp–Logan phantom and desk-scale tomography systems.

Geometry
--------
The q×q image occupies the square [-q/2, q/2]² in pixel units; pixel (i, j)
(row i from the top, column j from the left) covers
x ∈ [-q/2 + j, -q/2 + j + 1], y ∈ [q/2 - i - 1, q/2 - i] and is column
``i*q + j`` of A (row-major vec of the image).  A ray is a line
origin + t·direction; its matrix row holds the length of the line inside each
pixel, found by walking the grid-line crossings (Siddon-style traversal).
Rays that miss the image give all-zero rows, which are kept and reported in
the problem metadata.
"""
import logging
import math

import numpy as np

from kaczlab.models.problem import FanDetector, GeneratedProblem, PhantomImage, PhantomVariant, ProblemKind
from kaczlab.services.numerics import DenseMatrix

log = logging.getLogger(__name__)

# (x0, y0, a, b, phi_degrees) of the ten Shepp–Logan ellipses on [-1, 1]².
_ELLIPSES = (
    (0.0, 0.0, 0.69, 0.92, 0.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0),
    (0.22, 0.0, 0.11, 0.31, -18.0),
    (-0.22, 0.0, 0.16, 0.41, 18.0),
    (0.0, 0.35, 0.21, 0.25, 0.0),
    (0.0, 0.1, 0.046, 0.046, 0.0),
    (0.0, -0.1, 0.046, 0.046, 0.0),
    (-0.08, -0.605, 0.046, 0.023, 0.0),
    (0.0, -0.606, 0.023, 0.023, 0.0),
    (0.06, -0.605, 0.023, 0.046, 0.0),
)

# Every table keeps pixels in [0, 1] except kak_slaney, whose skull is 2.
INTENSITIES = {
    PhantomVariant.original: (1.0, -0.98, -0.02, -0.02, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01),
    PhantomVariant.modified: (1.0, -0.8, -0.2, -0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1),
    PhantomVariant.kak_slaney: (2.0, -0.98, -0.02, -0.02, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01),
}


# ── Phantom ───────────────────────────────────────────────────────────────────

def ellipses(variant: PhantomVariant = PhantomVariant.original) -> list[tuple[float, ...]]:
    """The ten ellipses as (intensity, x0, y0, a, b, phi_degrees)."""
    return [(value, *geom) for value, geom in zip(INTENSITIES[PhantomVariant(variant)], _ELLIPSES)]


def point_intensity(x: np.ndarray, y: np.ndarray, variant: PhantomVariant = PhantomVariant.original) -> np.ndarray:
    """Summed intensity of every ellipse containing each point (unclamped)."""
    total = np.zeros(np.broadcast(x, y).shape)
    for value, x0, y0, a, b, phi in ellipses(variant):
        c, s = math.cos(math.radians(phi)), math.sin(math.radians(phi))
        dx, dy = x - x0, y - y0
        inside = ((dx * c + dy * s) / a) ** 2 + ((-dx * s + dy * c) / b) ** 2 <= 1.0
        total = total + np.where(inside, value, 0.0)
    return total


def pixel_centers(q: int) -> tuple[np.ndarray, np.ndarray]:
    """(X, Y) grids of pixel centres in [-1, 1]², row 0 at the top."""
    coords = -1.0 + (2.0 * np.arange(q) + 1.0) / q
    return np.meshgrid(coords, coords[::-1])


def shepp_logan_phantom(q: int, variant: PhantomVariant = PhantomVariant.original) -> PhantomImage:
    """Rasterize the Shepp–Logan phantom by pixel-centre sampling, clamped at 0."""
    if q < 8:
        raise ValueError(f"phantom side must be >= 8, got {q}")
    x, y = pixel_centers(q)
    pixels = np.maximum(point_intensity(x, y, variant), 0.0)
    return PhantomImage(pixels=pixels)


# ── Ray tracing ───────────────────────────────────────────────────────────────

def _trace_ray(q: int, origin: np.ndarray, direction: np.ndarray, out: np.ndarray) -> bool:
    """Accumulate one ray's pixel intersection lengths into *out*; False if it misses."""
    h = q / 2.0
    d = direction / np.linalg.norm(direction)
    t_lo, t_hi = -np.inf, np.inf
    for axis in range(2):
        if d[axis] == 0.0:
            if not -h <= origin[axis] <= h:
                return False
            continue
        t1 = (-h - origin[axis]) / d[axis]
        t2 = (h - origin[axis]) / d[axis]
        t_lo = max(t_lo, min(t1, t2))
        t_hi = min(t_hi, max(t1, t2))
    if not t_hi > t_lo:
        return False

    grid = np.arange(q + 1) - h
    crossings = [np.array([t_lo, t_hi])]
    for axis in range(2):
        if d[axis] != 0.0:
            t = (grid - origin[axis]) / d[axis]
            crossings.append(t[(t > t_lo) & (t < t_hi)])
    t = np.unique(np.concatenate(crossings))
    lengths = np.diff(t)
    mid = 0.5 * (t[:-1] + t[1:])
    px = origin[0] + mid * d[0]
    py = origin[1] + mid * d[1]
    cols = np.clip(np.floor(px + h).astype(np.intp), 0, q - 1)
    rows = np.clip(np.floor(h - py).astype(np.intp), 0, q - 1)
    np.add.at(out, rows * q + cols, lengths)
    return True


def trace_rays(q: int, origins: np.ndarray, directions: np.ndarray) -> tuple[DenseMatrix, np.ndarray]:
    """
    System matrix for a set of rays over a q×q grid.

    Returns (A, missed) where ``missed`` is the boolean mask of all-zero rows.
    """
    origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    a = np.zeros((origins.shape[0], q * q))
    missed = np.zeros(origins.shape[0], dtype=bool)
    for k, (o, d) in enumerate(zip(origins, directions)):
        missed[k] = not _trace_ray(q, o, d, a[k])
    missed |= ~a.any(axis=1)
    return a, missed


def _tomo_problem(
    kind: ProblemKind,
    a: DenseMatrix,
    missed: np.ndarray,
    phantom: PhantomImage,
    variant: PhantomVariant,
    metadata: dict,
) -> GeneratedProblem:
    x_star = phantom.as_vector()
    zero_rows = [int(i) for i in np.flatnonzero(missed)]
    log.info("%s system %d×%d with %d zero rows", kind.value, a.shape[0], a.shape[1], len(zero_rows))
    return GeneratedProblem(
        a=a,
        b=a @ x_star,
        kind=kind,
        x_star=x_star,
        consistent=True,
        metadata={**metadata, "phantom": PhantomVariant(variant).value, "zero_rows": zero_rows},
    )


def default_ray_count(q: int) -> int:
    return math.ceil(math.sqrt(2.0) * q)


def gen_parallel_tomo(
    q: int,
    n_angles: int = 36,
    n_rays: int | None = None,
    variant: PhantomVariant = PhantomVariant.original,
) -> GeneratedProblem:
    """
    Parallel-beam system: angles uniformly spaced in [0°, 180°), n_rays parallel
    lines per angle with offsets evenly spread over the image diagonal.
    """
    if q < 8:
        raise ValueError(f"q must be >= 8, got {q}")
    if n_angles < 1:
        raise ValueError(f"n_angles must be >= 1, got {n_angles}")
    if n_rays is None:
        n_rays = default_ray_count(q)
    if n_rays < 1:
        raise ValueError(f"n_rays must be >= 1, got {n_rays}")

    span = math.sqrt(2.0) * q
    offsets = np.linspace(-span / 2, span / 2, n_rays) if n_rays > 1 else np.zeros(1)
    thetas = np.deg2rad(np.arange(n_angles) * 180.0 / n_angles)
    origins, directions = [], []
    for theta in thetas:
        d = np.array([math.cos(theta), math.sin(theta)])
        normal = np.array([-d[1], d[0]])
        for s in offsets:
            origins.append(s * normal)
            directions.append(d)
    a, missed = trace_rays(q, np.array(origins), np.array(directions))
    metadata = {"q": q, "n_angles": n_angles, "n_rays": n_rays}
    return _tomo_problem(ProblemKind.parallel_tomo, a, missed, shepp_logan_phantom(q, variant), variant, metadata)


def gen_fan_tomo(
    q: int,
    n_angles: int = 72,
    n_rays: int | None = None,
    source_distance: float = 2.0,
    variant: PhantomVariant = PhantomVariant.original,
    detector: FanDetector = FanDetector.flat,
) -> GeneratedProblem:
    """
    Fan-beam system: a point source on a circle of radius ``source_distance·q``
    rotates through [0°, 360°) and emits n_rays rays per position.

    With a flat detector the rays pass through points evenly spread over the
    image diagonal on the line through the centre perpendicular to the central
    ray.  With a curved (equiangular) detector they are evenly spaced in angle
    between the same two edge rays.
    """
    if q < 8:
        raise ValueError(f"q must be >= 8, got {q}")
    if n_angles < 1:
        raise ValueError(f"n_angles must be >= 1, got {n_angles}")
    if source_distance * q <= math.sqrt(2.0) * q / 2:
        raise ValueError("source must lie outside the image")
    if n_rays is None:
        n_rays = default_ray_count(q)
    if n_rays < 1:
        raise ValueError(f"n_rays must be >= 1, got {n_rays}")
    detector = FanDetector(detector)

    span = math.sqrt(2.0) * q
    offsets = np.linspace(-span / 2, span / 2, n_rays) if n_rays > 1 else np.zeros(1)
    radius = source_distance * q
    # equiangular fan between the flat fan's edge rays
    edge = math.atan2(span / 2, radius)
    betas = np.linspace(-edge, edge, n_rays) if n_rays > 1 else np.zeros(1)
    thetas = np.deg2rad(np.arange(n_angles) * 360.0 / n_angles)
    origins, directions = [], []
    for theta in thetas:
        src = radius * np.array([math.cos(theta), math.sin(theta)])
        perp = np.array([-math.sin(theta), math.cos(theta)])
        if detector is FanDetector.flat:
            fan = [u * perp - src for u in offsets]
        else:
            fan = [math.sin(beta) * radius * perp - math.cos(beta) * src for beta in betas]
        origins.extend([src] * len(fan))
        directions.extend(fan)
    a, missed = trace_rays(q, np.array(origins), np.array(directions))
    metadata = {
        "q": q,
        "n_angles": n_angles,
        "n_rays": n_rays,
        "source_distance": source_distance,
        "detector": detector.value,
    }
    return _tomo_problem(ProblemKind.fan_tomo, a, missed, shepp_logan_phantom(q, variant), variant, metadata)
