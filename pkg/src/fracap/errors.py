"""Structured exceptions shared across the package."""

from __future__ import annotations


class FracapError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(FracapError):
    """Spatial dimensions of two objects disagree."""

    def __init__(self, expected: int, got: int, context: str = ""):
        self.expected = expected
        self.got = got
        msg = f"spatial dimension mismatch: expected n={expected}, got n={got}"
        if context:
            msg += f" ({context})"
        super().__init__(msg)


class ConvergenceError(FracapError):
    """An iterative routine failed to reach its tolerance."""


class QuadratureError(FracapError):
    """Numerical integration failed; carries the achieved tolerance."""

    def __init__(self, message: str, achieved: float | None = None):
        self.achieved = achieved
        if achieved is not None:
            message += f" (achieved tolerance {achieved:g})"
        super().__init__(message)


class KernelDomainError(FracapError):
    """Kernel evaluated where it is singular or undefined."""


class AdmissibilityError(FracapError):
    """Cantor construction parameters leave no room for the required gaps."""


class UnboundedError(FracapError):
    """LP objective is unbounded on the feasible region."""


class SolverStallError(FracapError):
    """Simplex exceeded its iteration budget; carries an iteration trace."""

    def __init__(self, message: str, trace: list | None = None):
        self.trace = trace or []
        super().__init__(message)


class MeasureFormatError(FracapError):
    """Measure file malformed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
