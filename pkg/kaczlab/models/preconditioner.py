"""
The right preconditioner carried through a solve.

``SketchedPreconditioner`` holds the dense n×n matrix P̂_R together with how it
was obtained.  An explicitly supplied matrix (identity, exact QR
preconditioner) has ``r == 0`` and no indices: there was no sketch.
"""
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict

from kaczlab.errors import DimensionMismatchError


class PreconditionerMeta(BaseModel):
    """Provenance of a preconditioner without the matrix itself."""

    model_config = ConfigDict(frozen=True)

    n: int
    gamma: float
    r: int
    indices: tuple[int, ...]
    used_pseudoinverse: bool
    build_seconds: float


@dataclass(frozen=True)
class SketchedPreconditioner:
    p: np.ndarray
    gamma: float
    r: int
    indices: tuple[int, ...]
    used_pseudoinverse: bool = False
    build_seconds: float = 0.0

    def __post_init__(self):
        if self.p.ndim != 2 or self.p.shape[0] != self.p.shape[1]:
            raise DimensionMismatchError(f"preconditioner must be square, got {self.p.shape}")
        if self.r != len(self.indices):
            raise DimensionMismatchError(f"r={self.r} but {len(self.indices)} indices")
        self.p.setflags(write=False)

    @property
    def n(self) -> int:
        return self.p.shape[0]

    @property
    def sketched(self) -> bool:
        return self.r > 0

    @classmethod
    def from_matrix(cls, p: np.ndarray, build_seconds: float = 0.0) -> "SketchedPreconditioner":
        """Wrap an explicitly supplied matrix (no sketch)."""
        return cls(
            p=np.array(p, dtype=np.float64),
            gamma=1.0,
            r=0,
            indices=(),
            used_pseudoinverse=False,
            build_seconds=build_seconds,
        )

    @classmethod
    def identity(cls, n: int) -> "SketchedPreconditioner":
        return cls.from_matrix(np.eye(n))

    def meta(self) -> PreconditionerMeta:
        return PreconditionerMeta(
            n=self.n,
            gamma=self.gamma,
            r=self.r,
            indices=self.indices,
            used_pseudoinverse=self.used_pseudoinverse,
            build_seconds=self.build_seconds,
        )
