"""Exception hierarchy shared by every module."""

from __future__ import annotations


class FrechetError(ValueError):
    """Base class for all errors raised by frechetq."""


class SpaceMismatchError(FrechetError):
    """Two points, or a point and a space, do not agree on kind or size."""

    def __init__(self, expected: str, got: str, index: int | None = None):
        self.expected = expected
        self.got = got
        self.index = index
        where = f" at record {index}" if index is not None else ""
        super().__init__(f"space mismatch{where}: expected {expected}, got {got}")


class LossKindError(FrechetError):
    """A loss was applied to points it is not defined on."""

    def __init__(self, loss_kind: str, point_kind: str):
        self.loss_kind = loss_kind
        self.point_kind = point_kind
        super().__init__(f"loss {loss_kind!r} is not defined on {point_kind!r} points")


class InvalidPointError(FrechetError):
    """A point violates the invariants of its kind."""


class EmptyInputError(FrechetError):
    """A sample, prototype set or dataset that must be non-empty is empty."""


class InvalidParameterError(FrechetError):
    """A numeric or structural parameter is out of its admissible range."""


class ConfigError(FrechetError):
    """An experiment configuration is malformed or inconsistent."""


class ParseError(FrechetError):
    """A data file could not be parsed; carries file, line and column."""

    def __init__(self, path: str, line: int, column: int, message: str):
        self.path = path
        self.line = line
        self.column = column
        super().__init__(f"{path}:{line}:{column}: {message}")
