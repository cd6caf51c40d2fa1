"""
Seeded random streams, row samplers and sketch selection.

Streams
-------
``RngStream(seed, stream_id)`` wraps a PCG64 generator seeded from
``SeedSequence(seed, spawn_key=(stream_id,))``.  Equal (seed, stream_id) pairs
give identical sequences; different stream ids give independent streams.
The stream ids used by the package are the ``STREAM_*`` constants below.

Row access
----------
``RowSource`` is the only way the solver sees a system: it can fetch row i
(and its right-hand side) and report the dimensions.  ``DenseRowSource`` is
the in-memory implementation over a dense (A, b).
"""
import logging
import math
from collections.abc import Sequence
from typing import Protocol, runtime_checkable

import numpy as np

from kaczlab.errors import (
    DegenerateDistributionError,
    DimensionMismatchError,
    InvalidSketchSizeError,
)
from kaczlab.models.solve import RowSamplerKind
from kaczlab.services.numerics import DenseMatrix, Vector, as_matrix, as_vector

log = logging.getLogger(__name__)

STREAM_PROBLEM = 0
STREAM_SKETCH = 1
STREAM_ROWS = 2
STREAM_NOISE = 3

# Random draws are taken from the generator in blocks of this size.
_DRAW_BLOCK = 4096


# ── Random streams ────────────────────────────────────────────────────────────

class RngStream:
    """Reproducible random stream identified by (seed, stream_id)."""

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise ValueError("seed and stream_id must be non-negative")
        self.seed = seed
        self.stream_id = stream_id
        sequence = np.random.SeedSequence(seed, spawn_key=(stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def sibling(self, stream_id: int) -> "RngStream":
        """A fresh stream with the same seed and another id."""
        return RngStream(self.seed, stream_id)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


# ── Row sources ───────────────────────────────────────────────────────────────

@runtime_checkable
class RowSource(Protocol):
    """Row-only access to a linear system."""

    @property
    def row_count(self) -> int: ...

    @property
    def col_count(self) -> int: ...

    def row(self, i: int) -> tuple[Vector, float]: ...

    def rows(self, indices: Sequence[int]) -> tuple[DenseMatrix, Vector]: ...

    def squared_row_norms(self) -> Vector: ...


class DenseRowSource:
    """RowSource over an in-memory dense system; read-only and thread-safe."""

    def __init__(self, a: DenseMatrix, b: Vector):
        a = as_matrix(a, "A")
        b = as_vector(b, "b")
        if b.shape[0] != a.shape[0]:
            raise DimensionMismatchError(f"A has {a.shape[0]} rows but b has {b.shape[0]} entries")
        self._a = np.ascontiguousarray(a)
        self._b = b.copy()
        self._a.setflags(write=False)
        self._b.setflags(write=False)
        self._norms_sq: Vector | None = None

    @classmethod
    def from_problem(cls, problem) -> "DenseRowSource":
        return cls(problem.a, problem.b)

    @property
    def row_count(self) -> int:
        return self._a.shape[0]

    @property
    def col_count(self) -> int:
        return self._a.shape[1]

    def row(self, i: int) -> tuple[Vector, float]:
        return self._a[i], float(self._b[i])

    def rows(self, indices: Sequence[int]) -> tuple[DenseMatrix, Vector]:
        idx = np.asarray(indices, dtype=np.intp)
        return self._a[idx], self._b[idx]

    def squared_row_norms(self) -> Vector:
        if self._norms_sq is None:
            self._norms_sq = np.einsum("ij,ij->i", self._a, self._a)
        return self._norms_sq


# ── Row sampling ──────────────────────────────────────────────────────────────

class RowSampler:
    """
    Stateful row picker for the Kaczmarz loop.

    Uniform and SquaredNorm draws are taken with replacement; Cyclic walks
    ``cursor, cursor+1, ...`` modulo m.  Random draws are generated in blocks;
    the index sequence depends only on (seed, stream_id, kind, weights).
    """

    def __init__(
        self,
        kind: RowSamplerKind,
        m: int,
        rng: RngStream,
        weights: Vector | None = None,
        cursor: int = 0,
    ):
        if m < 1:
            raise ValueError("row sampler needs at least one row")
        self.kind = RowSamplerKind(kind)
        self.m = m
        self.rng = rng
        self.cursor = cursor % m
        self._cdf: Vector | None = None
        if self.kind is RowSamplerKind.squared_norm:
            if weights is None or weights.shape != (m,):
                raise DimensionMismatchError("squared-norm sampling needs one weight per row")
            self._cdf = _cumulative_weights(weights)
        self._block = np.empty(0, dtype=np.intp)
        self._pos = 0

    @classmethod
    def for_source(cls, kind: RowSamplerKind, source: RowSource, rng: RngStream) -> "RowSampler":
        weights = None
        if RowSamplerKind(kind) is RowSamplerKind.squared_norm:
            weights = source.squared_row_norms()
        sampler = cls(kind, source.row_count, rng, weights=weights)
        log.debug("Row sampler %s over %d rows (%r)", sampler.kind.value, sampler.m, rng)
        return sampler

    @property
    def probabilities(self) -> Vector:
        """Per-row selection probability."""
        if self._cdf is not None:
            return np.diff(self._cdf, prepend=0.0)
        return np.full(self.m, 1.0 / self.m)

    def next_row_index(self) -> int:
        """Next row index in [0, m)."""
        if self.m == 1:
            return 0
        if self.kind is RowSamplerKind.cyclic:
            i = self.cursor
            self.cursor = (self.cursor + 1) % self.m
            return i
        if self._pos >= self._block.size:
            self._refill()
        i = int(self._block[self._pos])
        self._pos += 1
        return i

    def _refill(self) -> None:
        gen = self.rng.generator
        if self.kind is RowSamplerKind.uniform:
            self._block = gen.integers(0, self.m, size=_DRAW_BLOCK)
        else:
            u = gen.random(_DRAW_BLOCK)
            idx = np.searchsorted(self._cdf, u, side="right")
            self._block = np.minimum(idx, self.m - 1)
        self._pos = 0


def _cumulative_weights(weights: Vector) -> Vector:
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DegenerateDistributionError("row weights must be finite and non-negative")
    total = float(w.sum())
    if total <= 0.0:
        raise DegenerateDistributionError("all rows have zero norm; squared-norm sampling undefined")
    cdf = np.cumsum(w / total)
    cdf[-1] = 1.0
    return cdf


# ── Sketch selection ──────────────────────────────────────────────────────────

def sketch_size(gamma: float, n: int, m: int) -> int:
    """r = ⌈γn⌉ clamped into [n, m]."""
    if gamma < 1:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    return int(min(max(math.ceil(gamma * n), n), m))


def sample_sketch_indices(m: int, r: int, rng: RngStream) -> np.ndarray:
    """r distinct row indices of [0, m), drawn uniformly, strictly increasing."""
    if r > m:
        raise InvalidSketchSizeError(f"cannot select {r} distinct rows out of {m}")
    if r < 1:
        raise InvalidSketchSizeError(f"sketch size must be positive, got {r}")
    if r == m:
        return np.arange(m)
    chosen = rng.generator.choice(m, size=r, replace=False)
    return np.sort(chosen)


def selection_matrix(indices: Sequence[int], m: int) -> DenseMatrix:
    """Materialize S ∈ 𝒮: row i has a single 1 at column indices[i]."""
    idx = np.asarray(indices, dtype=np.intp)
    s = np.zeros((idx.size, m))
    s[np.arange(idx.size), idx] = 1.0
    return s
