"""
Solver controls, trace records and solve results.

``SolveConfig`` and ``TraceRecord`` are pydantic models (validated, easily
dumped into manifests and CSV rows); ``SolveResult`` carries the final iterate
as a numpy array and is a plain dataclass.
"""
import enum
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from kaczlab.models.preconditioner import PreconditionerMeta


class RowSamplerKind(str, enum.Enum):
    """How the Kaczmarz loop picks the next row."""

    uniform = "uniform"
    squared_norm = "squared_norm"
    cyclic = "cyclic"


class SolveStatus(str, enum.Enum):
    """Why a solve stopped."""

    converged = "Converged"
    iter_budget = "IterBudget"
    time_budget = "TimeBudget"


class SolveConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    sampler: RowSamplerKind = RowSamplerKind.uniform
    max_iters: int = Field(10_000, ge=1)
    time_budget_seconds: float = Field(60.0, gt=0)
    target_rel_error: float = Field(1e-10, ge=0)
    # Only used when x* is unknown and a residual monitor is supplied.
    target_rel_residual: float | None = Field(None, ge=0)
    # None means one nominal epoch (m iterations).
    eval_every: int | None = Field(None, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)

    def resolved_eval_every(self, row_count: int) -> int:
        return self.eval_every if self.eval_every is not None else max(row_count, 1)


class TraceRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    iter: int
    elapsed_seconds: float
    rel_error: float | None = None
    residual: float | None = None


@dataclass
class SolveResult:
    """Outcome of one solve: final iterate, convergence trace and status."""

    x: np.ndarray
    trace: list[TraceRecord]
    status: SolveStatus
    iterations: int = 0
    skipped: int = 0
    preconditioner_meta: PreconditionerMeta | None = None
    # Iteration at which a fine-tuned solve switched to the preconditioned phase.
    switch_iter: int | None = field(default=None)

    @property
    def final(self) -> TraceRecord:
        return self.trace[-1]
