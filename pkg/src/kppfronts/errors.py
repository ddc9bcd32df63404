"""Exception hierarchy shared across the package."""


class KPPError(Exception):
    """Base class for all package-specific errors."""


class InvalidInput(KPPError):
    """Malformed or inconsistent inputs (non-finite values, mismatched grids)."""


class DomainError(KPPError):
    """Argument outside the mathematical domain of an operation."""


class NoFrontError(DomainError):
    """Requested front speed below the critical speed; no profile exists."""


class RangeError(KPPError):
    """Requested abscissa range too narrow to resolve both tails."""

    def __init__(self, message, suggested_range=None):
        super().__init__(message)
        self.suggested_range = suggested_range


class ResolutionError(KPPError):
    """Grid or tabulation too coarse to resolve the quantity asked for."""


class ConfigError(KPPError):
    """Solver or experiment configuration violates a validity condition."""


class NumericError(KPPError):
    """A numerical subroutine failed (e.g. degenerate linear solve)."""


class TrackingLostError(KPPError):
    """The tracked half-level crossing left the computational window."""


class NotBracketedError(KPPError):
    """A requested level is not attained on the grid."""


class InsufficientDataError(KPPError):
    """Trace or series too short for the requested estimate."""


class AccuracyError(KPPError):
    """Quadrature or fit failed to meet its accuracy target."""


class SchemeInconsistencyError(KPPError):
    """A monotonicity property of the scheme was violated beyond tolerance."""
