"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class MagspecError(Exception):
    """Base class for every error raised by the package."""


class InvalidSpec(MagspecError, ValueError):
    pass


class EmptyMask(MagspecError):
    """No grid node lies strictly inside the requested region."""


class ResolutionTooCoarse(MagspecError, ValueError):
    pass


class InvalidParams(MagspecError, ValueError):
    pass


class NegativeScale(MagspecError, ValueError):
    pass


class NonAdjacent(MagspecError, ValueError):
    pass


class WeightOverflow(MagspecError, OverflowError):
    pass


class NoConvergence(MagspecError):
    """Iterative solve hit ``max_iter``; carries the best iterate found."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class MassNotPD(MagspecError, ValueError):
    pass


class TooLarge(MagspecError, ValueError):
    pass


class ZeroVector(MagspecError, ValueError):
    pass


class TooFewRecords(MagspecError, ValueError):
    pass


class WrongWeightTag(MagspecError, ValueError):
    pass


class SupportViolation(MagspecError, ValueError):
    pass


class ParseError(MagspecError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ValidationError(MagspecError, ValueError):
    def __init__(self, key: str, message: str = "invalid value"):
        super().__init__(f"{key}: {message}")
        self.key = key


class MissingColumn(MagspecError, KeyError):
    pass


class TooFewRows(MagspecError, ValueError):
    pass
