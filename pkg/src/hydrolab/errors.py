"""Exception types shared across the package."""


class HydrolabError(Exception):
    """Base class for all package-specific errors."""


class TruncationError(HydrolabError):
    """Series tail at the truncation order exceeds the certified tolerance."""


class BracketError(HydrolabError):
    """No upper bracket for the density root before truncation failed."""


class AsymmetryError(HydrolabError):
    """Kernel has nonzero mean displacement under a parabolic-scaling request."""


class NormalizationError(HydrolabError):
    """Kernel probabilities do not sum to one."""


class EmptySiteError(HydrolabError):
    """Jump requested from a site with zero particles."""


class ShapeError(HydrolabError):
    """Mismatched tori or grid shapes."""


class FrozenError(HydrolabError):
    """Total jump rate is zero; the dynamics cannot advance."""

    def __init__(self, message, time=None, n_events=0):
        super().__init__(message)
        self.time = time
        self.n_events = n_events


class NotOneJumpError(HydrolabError):
    """Configurations do not differ by exactly one generalized jump."""


class CflError(HydrolabError):
    """Explicit time step exceeds the stability bound."""


class NegativityError(HydrolabError):
    """Profile value dropped below the negativity tolerance."""


class MassMismatchError(HydrolabError):
    """Grid measures differ in total mass beyond tolerance."""


class RangeError(HydrolabError):
    """Requested mass or index outside the tabulated range."""


class FloorError(HydrolabError):
    """Profile dips below the required positive floor."""


class DegenerateFitError(HydrolabError):
    """Log-log fit requested on data containing exact zeros."""


class ConfigError(HydrolabError):
    """Experiment configuration failed validation."""
