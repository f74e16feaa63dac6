"""Exception hierarchy.

Validation failures (bad parameters, malformed files, incompatible grids)
derive from :class:`InvalidConfigError` and map to CLI exit code 2; runtime
failures map to exit 1; non-convergence is flagged on results, not raised,
except where the CLI promotes it to exit 3.
"""


class LevspecError(Exception):
    """Base class for all package errors."""


class InvalidConfigError(LevspecError, ValueError):
    """A parameter or configuration invariant is violated."""


class UnstableStepError(InvalidConfigError):
    """Integrator accuracy guard tripped: dt * omega > 0.1."""


class AliasingError(InvalidConfigError):
    """Carrier plus expected signal bandwidth exceeds Nyquist."""


class TooShortError(InvalidConfigError):
    """Input series shorter than the requested segment length."""


class GridMismatchError(InvalidConfigError):
    """Estimate and model are not on the same frequency grid."""


class InsufficientSpanError(InvalidConfigError):
    """Frequency grid does not contain enough of the spectral mass."""


class ResolutionError(InvalidConfigError):
    """Grid spacing too coarse to resolve the linewidth."""


class GridSpanError(InvalidConfigError):
    """Convolution series would wrap on this grid."""


class QuadratureDomainError(InvalidConfigError):
    """A Gauss-Hermite node falls outside the physical domain (1 + r <= 0)."""


class NonPositiveModelError(LevspecError):
    """Model spectrum A*density + B is non-positive inside the fit window."""


class DegenerateModelError(LevspecError):
    """Nuisance parameters are unidentifiable (constant model density)."""


class NonConvergenceError(LevspecError):
    """Too many non-converged fits in an ensemble run (> 20%)."""
