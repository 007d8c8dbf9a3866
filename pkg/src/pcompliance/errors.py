"""Exception and warning types shared across the package."""


class NonConvergence(RuntimeError):
    """Energy minimization hit the iteration cap above tolerance.

    Carries the partially converged field and its report so callers can
    inspect the last residual.
    """

    def __init__(self, message, report=None, field=None):
        super().__init__(message)
        self.report = report
        self.field = field


class DegenerateTarget(ValueError):
    """Capacity target captures no grid node at the current resolution."""


class UnpinnedMask(ValueError):
    """Constraint mask pins nothing, so the Rayleigh quotient infimum is zero."""


class ResolutionTooCoarse(RuntimeError):
    """A crack segment is invisible (or nearly so) on the local grid."""


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class ResolutionWarning(UserWarning):
    """A crack feature sits near or below the resolving power of the grid."""
