"""Exception types shared across the package."""


class TempathError(Exception):
    """Base class for all package errors."""


class DomainError(TempathError, ValueError):
    """An argument lies outside the domain of an operation (e.g. T2 <= T1)."""


class BoundaryLeak(TempathError):
    """Probability mass reached the edge of a finite grid."""


class NonConvergent(TempathError):
    """A numerical limit (regularization, window tail) failed to settle."""


class NonPositive(TempathError):
    """A normalization constant came out non-positive."""


class StepRejected(TempathError):
    """The trajectory integrator could not meet its local error bound."""


class NoTrajectory(TempathError):
    """Shooting failed to connect the requested endpoints."""


class CausticError(TempathError):
    """The van Vleck determinant blew up (conjugate point)."""


class DetectorWindow(TempathError):
    """An evolved packet left the detector grid."""


class ConfigError(TempathError):
    """A run configuration failed to parse or validate."""
