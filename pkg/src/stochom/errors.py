"""Errors raised by the homogenization engine.

Every failure mode that callers are expected to handle gets its own class so
the CLI can map it to a structured error report.
"""


class StochomError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(StochomError):
    """Invalid or inconsistent run configuration.

    Carries the offending field name so error reports can point at it.
    """

    def __init__(self, field, message):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


class NonFiniteCoefficient(StochomError):
    """A coefficient sample produced NaN or Inf."""


class NonElliptic(StochomError):
    """Coercivity failed: some sampled point has a non-positive eigenvalue.

    Attributes carry the violating location and the offending eigenvalue.
    """

    def __init__(self, message, y=None, eigenvalue=None):
        self.y = None if y is None else list(y)
        self.eigenvalue = eigenvalue
        super().__init__(message)


class NonDissipative(NonElliptic):
    """Complex constitutive matrix lost its positive Hermitian part."""


class NoConvergence(StochomError):
    """Iterative linear solve failed to reach the requested tolerance."""

    def __init__(self, message, iterations=None, residual=None):
        self.iterations = iterations
        self.residual = residual
        super().__init__(message)


class IterationLimit(StochomError):
    """Newton inversion of the deformation map hit its iteration cap."""


class SingularMean(StochomError):
    """Estimated mean deformation gradient is singular, no volume factor."""


class UnresolvedScale(StochomError):
    """Mesh too coarse for the requested oscillation period."""


class SupercellTooSmall(StochomError):
    """Sampled deformation window does not cover the requested domain."""
