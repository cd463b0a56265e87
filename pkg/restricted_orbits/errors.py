"""
Domain errors for the restricted 4-body toolkit.
Every failure the library can signal has its own class so callers (and the CLI
exit-code mapping) can tell a numerical failure from a usage error.
"""


class RestrictedOrbitsError(Exception):
    """Base class for every error raised by this package."""


# ============================================================================
# INPUT / FORMAT ERRORS
# ============================================================================

class NonPositiveMass(RestrictedOrbitsError, ValueError):
    """A primary mass was zero or negative."""


class GridTooCoarse(RestrictedOrbitsError, ValueError):
    """The sampling grid cannot resolve the requested number of harmonics."""


class PointOnCurve(RestrictedOrbitsError, ValueError):
    """The winding reference point lies on (or numerically on) the curve."""


class LoopFormatError(RestrictedOrbitsError, ValueError):
    """A loop file violates its format contract (shape, symmetry, finiteness)."""


class ConfigError(RestrictedOrbitsError, ValueError):
    """A run configuration could not be parsed or validated."""


# ============================================================================
# NUMERICAL ERRORS
# ============================================================================

class CollisionOnPath(RestrictedOrbitsError):
    """A loop passes through (or numerically through) a primary."""


class NoConvergence(RestrictedOrbitsError):
    """Quadrature doubling budget exhausted before the tolerance was met."""


class Undersampled(RestrictedOrbitsError):
    """Angle increments stayed too large even at the finest allowed sampling."""


class NotDescending(RestrictedOrbitsError):
    """Line search could not reduce the action at a nonzero gradient."""


class CollisionApproach(RestrictedOrbitsError):
    """Descent drove a separation below the collision floor.

    The last safe iterate is attached as ``result`` (converged = False).
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class CollisionSingularity(RestrictedOrbitsError):
    """The equation of motion was evaluated on top of a primary."""


class SingularityApproach(RestrictedOrbitsError):
    """Time integration came too close to a primary."""


class StepTooSmall(RestrictedOrbitsError):
    """Step halving reached the minimum admissible step."""
