from kaczlab.models.preconditioner import PreconditionerMeta, SketchedPreconditioner
from kaczlab.models.problem import FanDetector, GeneratedProblem, PhantomImage, PhantomVariant, ProblemKind
from kaczlab.models.solve import RowSamplerKind, SolveConfig, SolveResult, SolveStatus, TraceRecord

__all__ = [
    "GeneratedProblem",
    "PhantomImage",
    "PhantomVariant",
    "FanDetector",
    "PreconditionerMeta",
    "ProblemKind",
    "RowSamplerKind",
    "SketchedPreconditioner",
    "SolveConfig",
    "SolveResult",
    "SolveStatus",
    "TraceRecord",
]
