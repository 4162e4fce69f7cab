"""Error taxonomy shared across the package.

DomainError / UsageError live in ia (they are raised by the interval
layer too); the resource and parse errors below are pipeline-level.
CLI exit codes: config/usage/domain -> 2, memory budget -> 3, parse -> 4.
"""

from .ia import DomainError, UsageError

__all__ = [
    "DomainError",
    "UsageError",
    "ResourceError",
    "MemoryBudgetError",
    "ParseError",
]


class ResourceError(RuntimeError):
    """A configured resource limit (depth, memory) would be exceeded."""


class MemoryBudgetError(ResourceError):
    """The edge build ran past the configured memory budget."""

    def __init__(self, message, vertices=0, edges=0):
        super().__init__(message)
        self.vertices = vertices
        self.edges = edges


class ParseError(ValueError):
    """A model file or parameter string could not be parsed."""
