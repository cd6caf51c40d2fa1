"""
Exception hierarchy for kaczlab.

Every failure the library raises deliberately is a ``KaczlabError`` so the CLI
boundary can map it to an exit code.  Argument-shape problems also inherit
from ``ValueError`` so ordinary callers can catch them the usual way.
"""


class KaczlabError(Exception):
    """Base class for all kaczlab errors."""


class DimensionMismatchError(KaczlabError, ValueError):
    """Operand shapes do not agree."""


class NonFiniteError(KaczlabError, ValueError):
    """A matrix or vector contains NaN or Inf."""


class SingularFactorError(KaczlabError):
    """A triangular factor has a (numerically) zero diagonal entry."""

    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"singular triangular factor at diagonal index {index}")


class DegenerateDistributionError(KaczlabError):
    """A sampling distribution has zero total mass."""


class InvalidSketchSizeError(KaczlabError, ValueError):
    """Requested sketch size does not fit the row count."""


class ZeroRowError(KaczlabError):
    """A Kaczmarz projection was attempted onto a zero row."""

    def __init__(self, index: int | None = None):
        self.index = index
        where = f" {index}" if index is not None else ""
        super().__init__(f"row{where} has zero norm")


class ConditioningOverflowError(KaczlabError):
    """The smallest singular value is too small for a meaningful condition number."""


class DegenerateInputError(KaczlabError, ValueError):
    """Input is valid in shape but degenerate for the requested quantity."""


class TraceFormatError(KaczlabError):
    """A trace CSV file could not be parsed."""

    def __init__(self, path: str, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class ConfigError(KaczlabError):
    """An experiment configuration could not be parsed or validated."""

    def __init__(self, source: str, diagnostics: list[str]):
        self.source = source
        self.diagnostics = diagnostics
        super().__init__(f"{source}: " + "; ".join(diagnostics))
