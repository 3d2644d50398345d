"""Exception types shared across the library."""


class DimensionMismatch(ValueError):
    """Two vectors that must agree in length do not."""


class DivisionByZero(ZeroDivisionError):
    """Elementwise division hit a zero denominator.

    Carries the index of the first offending coordinate so callers can point
    at the exact parameter instead of a bare numpy warning.
    """

    def __init__(self, index: int):
        self.index = int(index)
        super().__init__(f"zero denominator at coordinate {self.index}")


class NonFiniteValue(FloatingPointError):
    """A NaN or infinity appeared where a finite float is required."""


class OutOfHorizon(ValueError):
    """A finite-horizon schedule was evaluated past its last defined step."""


class InvalidConstants(ValueError):
    """Algorithm constants (strong convexity, smoothness, radius) out of range."""


class EmptyWindow(ValueError):
    """A recording window selected no steps."""


class AllZero(ValueError):
    """Magnitude statistics were requested but every magnitude is zero."""


class MissingTraceFields(ValueError):
    """A trace lacks a field the requested check needs."""


class ConfigError(ValueError):
    """An experiment config failed validation."""


class NonRectangularGrid(ValueError):
    """Grid data does not cover the full cartesian product of its axes."""


class DatasetFormatError(ValueError):
    """A dataset file row failed to parse. Carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        self.line_number = int(line_number)
        super().__init__(f"line {self.line_number}: {message}")
