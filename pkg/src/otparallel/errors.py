"""Exception types shared across the package."""


class OTParallelError(Exception):
    """Base class for all package-specific failures."""


class CutLocusError(OTParallelError):
    """Logarithm requested at or beyond the cut locus of the base point.

    Signals that the caller must refine its discretization (shorter
    matched pairs, smaller time horizon).
    """


class ConjugatePointError(OTParallelError):
    """Differential of the exponential map is singular at this radius."""


class ResolutionMismatchError(OTParallelError):
    """Grid fields with incompatible shapes were combined."""


class SizeCapExceededError(OTParallelError):
    """Particle measure exceeds the configured solver size cap."""


class SolverDivergedError(OTParallelError):
    """Iterative linear solver failed to reach its residual target."""


class MapDegenerateError(OTParallelError):
    """Lagrangian flow map is not a diffeomorphism up to time one."""


class NotContractiveError(OTParallelError):
    """Sampled operator norm of (A_i B_i - I) is not below one."""


class MaxIterationsError(OTParallelError):
    """Fixed-point iteration hit its iteration cap before converging."""


class ScaleNotFoundError(OTParallelError):
    """No positive scale made the function c-convex down to the floor."""


class BaseMismatchError(OTParallelError):
    """Cone elements over different base measures cannot be compared."""


class ConfigError(OTParallelError):
    """Invalid or incomplete experiment configuration."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class UnknownCommandError(OTParallelError):
    """CLI command is not in the experiment registry."""
