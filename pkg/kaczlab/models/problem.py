"""
Generated linear systems and phantom images.
"""
import enum
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from kaczlab.errors import DimensionMismatchError


class ProblemKind(str, enum.Enum):
    """Generator that produced a system."""

    random = "random"
    parallel_tomo = "parallel_tomo"
    fan_tomo = "fan_tomo"
    rff = "rff"


class FanDetector(str, enum.Enum):
    """Detector shape of the fan-beam geometry."""

    flat = "flat"
    curved = "curved"


class PhantomVariant(str, enum.Enum):
    """Shepp–Logan intensity table."""

    original = "original"
    modified = "modified"
    kak_slaney = "kak_slaney"


@dataclass(frozen=True)
class PhantomImage:
    pixels: np.ndarray

    def __post_init__(self):
        if self.pixels.ndim != 2 or self.pixels.shape[0] != self.pixels.shape[1]:
            raise DimensionMismatchError(f"phantom must be q×q, got {self.pixels.shape}")
        self.pixels.setflags(write=False)

    @property
    def q(self) -> int:
        return self.pixels.shape[0]

    def as_vector(self) -> np.ndarray:
        """Row-major q²-vector, the x* of a tomography system."""
        return self.pixels.reshape(-1).copy()


@dataclass(frozen=True)
class GeneratedProblem:
    """A system (A, b) with optional ground truth and generator metadata."""

    a: np.ndarray
    b: np.ndarray
    kind: ProblemKind
    x_star: np.ndarray | None = None
    consistent: bool = True
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        m, n = self.a.shape
        if self.b.shape != (m,):
            raise DimensionMismatchError(f"b has shape {self.b.shape}, expected ({m},)")
        if self.x_star is not None and self.x_star.shape != (n,):
            raise DimensionMismatchError(f"x_star has shape {self.x_star.shape}, expected ({n},)")

    @property
    def shape(self) -> tuple[int, int]:
        return self.a.shape
