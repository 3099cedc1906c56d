"""Exception types raised across the package."""


class GravcavError(Exception):
    """Base class for all package errors."""


class DomainError(GravcavError, ValueError):
    """An argument lies outside the domain of a function (e.g. a non-positive stretch)."""


class InvalidParameterError(GravcavError, ValueError):
    """A material or solver parameter is not admissible."""


class DegeneracyError(GravcavError, ArithmeticError):
    """The Euler-Lagrange equation cannot be solved for r'' (phi11 <= 0)."""


class GridError(GravcavError, ValueError):
    """A node grid is degenerate (repeated or unsorted nodes)."""


class ConfigError(GravcavError, ValueError):
    """A configuration document is malformed."""


class SolverError(GravcavError, RuntimeError):
    """A solver could not produce a result.

    ``status`` carries the machine-readable reason and ``diagnostics`` any
    partial information gathered before the failure.
    """

    def __init__(self, message, status="failed", diagnostics=None):
        super().__init__(message)
        self.status = status
        self.diagnostics = dict(diagnostics or {})


class AmbiguityError(SolverError):
    """The cavitation indicator is not monotone across a lambda bracket."""

    def __init__(self, message, samples):
        super().__init__(message, status="ambiguous", diagnostics={"samples": samples})
        self.samples = samples
