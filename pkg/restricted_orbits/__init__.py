"""
Periodic orbits of a small mass moving among three primaries that rotate
rigidly in the equilateral Lagrange configuration.
"""

from .config import Masses, PrimaryConfig, PrimaryField, lagrange_orbits, masses_new
from .errors import RestrictedOrbitsError
from .loops import CircularLoopParams, EllipticLoopParams, FourierLoop, SampledLoop

__all__ = [
    "Masses",
    "PrimaryConfig",
    "PrimaryField",
    "lagrange_orbits",
    "masses_new",
    "RestrictedOrbitsError",
    "CircularLoopParams",
    "EllipticLoopParams",
    "FourierLoop",
    "SampledLoop",
]
