"""Exception hierarchy for gbcheck."""

from __future__ import annotations


class GBCheckError(Exception):
    """Base class for all gbcheck errors."""


class DimensionError(GBCheckError):
    """Mismatched, odd or unsupported algebra dimension, or wrong grade argument."""


class AlgebraError(GBCheckError):
    """Algebraic input that violates a required symmetry."""


class GeometryError(GBCheckError):
    """Invalid geometric data or a failed geometric evaluation."""


class GeodesicError(GeometryError):
    """Geodesic or parallel-transport integration failed."""


class GridError(GBCheckError):
    """Unsupported grid, chart or memory budget."""


class KrylovError(GBCheckError):
    """Krylov exponential-times-vector did not converge."""


class SimulationError(GBCheckError):
    """Monte Carlo simulation could not produce a valid estimate."""


class StudyError(GBCheckError):
    """Convergence-order fit is degenerate."""


class ExpressionError(GBCheckError):
    """Base class for expression parsing and evaluation failures."""

    def __init__(self, message: str, line: int = 1, column: int = 1) -> None:
        super().__init__(f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column


class ExpressionSyntaxError(ExpressionError):
    """Malformed expression text."""


class UnknownIdentifierError(ExpressionError):
    """Variable or function name not available in the evaluation context."""


class ExpressionDomainError(ExpressionError):
    """Expression evaluated outside the domain of one of its functions."""


class ValidationError(GBCheckError):
    """Invalid configuration or geometry spec field."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


NUMERICAL_ERRORS = (KrylovError, SimulationError, StudyError, GeodesicError)
