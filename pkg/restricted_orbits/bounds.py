"""
Action lower bounds.

Gordon / Long–Zhang: any loop of period T around a fixed centre of strength a
has action at least (3/2)(2π)^{2/3} a^{2/3} T^{1/3}.

d₁: every collision solution of the restricted problem in the anti-T/2 loop
space has action at least (3/2)(2π)^{2/3} C M^{−1/3} T^{1/3}. A test loop with
smaller action certifies that the minimizer is collision-free.
"""

import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field

from .config import TWO_PI, Masses
from .loops import FourierLoop

KEPLER_FACTOR = 1.5 * TWO_PI ** (2.0 / 3.0)


class BoundReport(BaseModel):
    """Collision threshold d₁ and the constant C it is built from."""

    model_config = ConfigDict(frozen=True)

    C: float = Field(..., gt=0)
    d1: float = Field(..., gt=0)
    per_body_terms: tuple[float, float, float]
    minimizing_index: int = Field(..., ge=1, le=3, description="Lowest 1-based index attaining C")


class NoncollisionCertificate(BaseModel):
    model_config = ConfigDict(frozen=True)

    test_action: float
    d1: float

    @computed_field
    @property
    def margin(self) -> float:
        return self.d1 - self.test_action

    @computed_field
    @property
    def passes(self) -> bool:
        return self.test_action < self.d1


def gordon_bound(a, t1, t2) -> float:
    """(3/2)(2π)^{2/3} a^{2/3} (t2 − t1)^{1/3}"""
    if not a > 0:
        raise ValueError(f"Centre strength must be positive, got {a}")
    if not t2 > t1:
        raise ValueError(f"Need t2 > t1, got [{t1}, {t2}]")
    return KEPLER_FACTOR * a ** (2.0 / 3.0) * (t2 - t1) ** (1.0 / 3.0)


def long_zhang_bound(a, T) -> float:
    """Lower bound on the action of a T-periodic loop around a centre of strength a."""
    if not T > 0:
        raise ValueError(f"Period must be positive, got {T}")
    return gordon_bound(a, 0.0, T)


def kepler_witness_radius(a, T) -> float:
    """r* = (a T² / 4π²)^{1/3}, the circular Kepler orbit attaining the bound."""
    return float(np.cbrt(a * T * T / (TWO_PI * TWO_PI)))


def kepler_witness_loop(a, T, K=1) -> FourierLoop:
    """Counter-clockwise circular Kepler loop of radius r* centred at the origin."""
    loop = FourierLoop.zeros(T, K)
    cos = np.array(loop.cos)
    sin = np.array(loop.sin)
    r = kepler_witness_radius(a, T)
    cos[0] = (r, 0.0)
    sin[0] = (0.0, r)
    return FourierLoop(T=T, cos=cos, sin=sin)


def collision_constant_C(masses: Masses):
    """
    per_body_terms[i] = 2^{2/3} m_i + (M − m_i) − (m1 m2 + m1 m3 + m2 m3) / (3M)

    Returns (C, per_body_terms) with C the minimum.
    """
    M = masses.M
    shared = masses.pair_sum / (3.0 * M)
    terms = tuple(2.0 ** (2.0 / 3.0) * m + (M - m) - shared for m in masses.as_array())
    return min(terms), terms


def collision_lower_bound_d1(masses: Masses, T) -> BoundReport:
    """d₁ = (3/2)(2π)^{2/3} C M^{−1/3} T^{1/3}"""
    if not T > 0:
        raise ValueError(f"Period must be positive, got {T}")
    C, terms = collision_constant_C(masses)
    d1 = KEPLER_FACTOR * C * masses.M ** (-1.0 / 3.0) * T ** (1.0 / 3.0)
    # index() returns the first match, so ties go to the lowest index
    return BoundReport(C=C, d1=d1, per_body_terms=terms, minimizing_index=terms.index(C) + 1)


def certify_noncollision(test_action, report: BoundReport) -> NoncollisionCertificate:
    """passes iff test_action < d1 (strict)."""
    if not (math.isfinite(test_action) and math.isfinite(report.d1)):
        raise ValueError(f"Non-finite certificate inputs: {test_action}, {report.d1}")
    return NoncollisionCertificate(test_action=float(test_action), d1=report.d1)
