"""Exception hierarchy shared by all fracwave modules."""

from __future__ import annotations


class FracWaveError(Exception):
    """Base class for every error raised by the package."""


class InvalidOrder(FracWaveError, ValueError):
    pass


class NonConvergent(FracWaveError, ArithmeticError):
    pass


class StepUnderflow(FracWaveError, ArithmeticError):
    pass


class OutOfTheoremRange(FracWaveError, ValueError):
    pass


class NotOrthonormal(FracWaveError, ValueError):
    pass


class QuadratureUnderResolved(FracWaveError, ValueError):
    pass


class QuadratureFailure(FracWaveError, ArithmeticError):
    pass


class DomainError(FracWaveError, ValueError):
    pass


class ExtrapolationDivergence(FracWaveError, ArithmeticError):
    pass


class NonIntegrable(FracWaveError, ValueError):
    pass


class GridNotUniform(FracWaveError, ValueError):
    pass


class SingularStep(FracWaveError, ArithmeticError):
    pass


class DegenerateFit(FracWaveError, ValueError):
    pass


class OutOfRange(FracWaveError, ValueError):
    pass


class ParseError(FracWaveError, ValueError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(FracWaveError, ValueError):
    pass
