"""Exception types raised across the package."""

from __future__ import annotations


class ParameterError(ValueError):
    """A configuration value is outside its valid domain.

    ``key`` names the offending field when there is one.
    """

    def __init__(self, message: str, key: str | None = None) -> None:
        self.key = key
        super().__init__(message)


class OrderingError(ValueError):
    """An edge arrived in a time bin earlier than the current one."""


class StateError(RuntimeError):
    """An operation was requested before the state could answer it."""


class ParseError(ValueError):
    """An input line could not be parsed."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LengthError(ValueError):
    """Paired sequences (edges and labels) have different lengths."""


class UndefinedAUCError(ValueError):
    """ROC-AUC requested for labels that contain only one class."""
