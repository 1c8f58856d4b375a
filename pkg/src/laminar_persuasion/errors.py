"""Exception types raised across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class InfeasibleError(RuntimeError):
    """The optimization problem has no feasible point.

    ``type_index`` names the receiver type whose constraint cannot be met,
    when one can be identified.
    """

    def __init__(self, message: str, type_index: int | None = None, constraint: str | None = None):
        super().__init__(message)
        self.type_index = type_index
        self.constraint = constraint


class ConvergenceError(RuntimeError):
    """The cutting-plane loop hit its round limit.

    The best solution found so far is attached as ``incumbent``.
    """

    def __init__(self, message: str, incumbent=None):
        super().__init__(message)
        self.incumbent = incumbent


class ConstructionError(RuntimeError):
    """A laminar partition could not be built from the given atoms."""


class ProblemFormatError(ValueError):
    """A problem file is malformed. ``field`` points at the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
