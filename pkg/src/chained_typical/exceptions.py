"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes, so each class corresponds to one
failure category: bad input, failed construction, exceeded resources.
"""

from __future__ import annotations


class DomainError(ValueError):
    """Input outside the domain of an operation (bad symbol, bad shape, ...)."""


class UnsupportedRangeError(DomainError):
    """Partial trace requested over a site range that is not a prefix or suffix."""


class ZeroOperatorError(DomainError):
    """Range projector requested for an operator that is numerically zero."""


class CorruptionError(DomainError):
    """A bit sequence could not be decoded."""


class ConstructionError(RuntimeError):
    """A chained family could not be built.

    Attributes:
        depth: first depth at which the family became empty, if known.
    """

    def __init__(self, message: str, depth: int | None = None):
        super().__init__(message)
        self.depth = depth


class TighteningError(ConstructionError):
    """Tightening removed every word of a family."""


class SelectionError(RuntimeError):
    """No block length satisfied the entropy-density criterion."""

    def __init__(self, message: str, tried: list[tuple[int, float]] | None = None):
        super().__init__(message)
        self.tried = tried or []


class ResourceError(RuntimeError):
    """A dense operator would exceed the dimension cap."""


class ConfigError(ValueError):
    """Invalid experiment configuration.

    Attributes:
        line: 1-based line in the config document the problem points at.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
