"""
Primary configuration: the three masses on the rotating equilateral (Lagrange)
solution, plus the source field the small mass moves in.

Units: gravitational constant G = 1; lengths, times and masses are otherwise
free. Primaries move on circles q_i(t) = r_i (cos(2πt/T + θ_i), sin(2πt/T + θ_i)).
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field

from .errors import NonPositiveMass

TWO_PI = 2.0 * math.pi
SQRT3 = math.sqrt(3.0)


class Masses(BaseModel):
    """The three primary masses. M is always recomputed from the parts."""

    model_config = ConfigDict(frozen=True)

    m1: float = Field(..., gt=0, description="Mass of primary 1 (G = 1 units)")
    m2: float = Field(..., gt=0, description="Mass of primary 2")
    m3: float = Field(..., gt=0, description="Mass of primary 3")

    @computed_field
    @property
    def M(self) -> float:
        return self.m1 + self.m2 + self.m3

    @property
    def pair_sum(self) -> float:
        """m1 m2 + m1 m3 + m2 m3"""
        return self.m1 * self.m2 + self.m1 * self.m3 + self.m2 * self.m3

    def as_array(self) -> np.ndarray:
        return np.array([self.m1, self.m2, self.m3], dtype=float)

    def permuted(self, order) -> "Masses":
        values = self.as_array()[list(order)]
        return masses_new(*values)


class PrimaryConfig(BaseModel):
    """Rotating equilateral configuration of the primaries."""

    model_config = ConfigDict(frozen=True)

    T: float = Field(..., gt=0, description="Period of the rigid rotation")
    l: float = Field(..., gt=0, description="Side length of the equilateral triangle")
    r: tuple[float, float, float] = Field(..., description="Orbit radii r1, r2, r3")
    theta: tuple[float, float, float] = Field(..., description="Phase angles in [0, 2π)")

    @property
    def omega(self) -> float:
        return TWO_PI / self.T

    def position(self, i, t):
        """Position of primary i (1-based) at scalar or array time t."""
        return _circle(self.r[i - 1], self.theta[i - 1], self.omega, t)

    def velocity(self, i, t):
        return _circle_velocity(self.r[i - 1], self.theta[i - 1], self.omega, t)

    def positions(self, t) -> np.ndarray:
        """Array of shape (3, *t.shape, 2)."""
        return np.stack([self.position(i, t) for i in (1, 2, 3)])

    def velocities(self, t) -> np.ndarray:
        return np.stack([self.velocity(i, t) for i in (1, 2, 3)])

    def rotated(self, angle) -> "PrimaryConfig":
        """Same configuration rigidly rotated by ``angle`` radians."""
        theta = tuple(_normalize_angle(th + angle) for th in self.theta)
        return self.model_copy(update={"theta": theta})


def _normalize_angle(angle):
    angle = math.fmod(angle, TWO_PI)
    if angle < 0.0:
        angle += TWO_PI
    if angle >= TWO_PI:
        angle -= TWO_PI
    return angle


def _circle(radius, phase, omega, t):
    angle = omega * np.asarray(t, dtype=float) + phase
    return radius * np.stack([np.cos(angle), np.sin(angle)], axis=-1)


def _circle_velocity(radius, phase, omega, t):
    angle = omega * np.asarray(t, dtype=float) + phase
    return radius * omega * np.stack([-np.sin(angle), np.cos(angle)], axis=-1)


# ============================================================================
# OPERATIONS
# ============================================================================

def masses_new(m1, m2, m3) -> Masses:
    """Validate and build the primary masses."""
    values = (float(m1), float(m2), float(m3))
    for index, value in enumerate(values, 1):
        if not math.isfinite(value):
            raise ValueError(f"m{index} must be finite, got {value}")
        if value <= 0.0:
            raise NonPositiveMass(f"m{index} must be positive, got {value}")
    return Masses(m1=values[0], m2=values[1], m3=values[2])


def side_length(masses: Masses, T) -> float:
    """Side length l of the equilateral triangle: l³ = M T² / (4π²)."""
    if not T > 0:
        raise ValueError(f"Period T must be positive, got {T}")
    return float(np.cbrt(masses.M * T * T / (TWO_PI * TWO_PI)))


def lagrange_orbits(masses: Masses, T) -> PrimaryConfig:
    """
    Build the rotating Lagrange configuration for the given masses and period.

    Orientation: primary 1 starts on the positive-x side of the centre of mass,
    primaries 2 and 3 follow counter-clockwise.
    """
    l = side_length(masses, T)
    m1, m2, m3 = masses.m1, masses.m2, masses.m3
    M = masses.M

    s1 = math.sqrt(m2 * m2 + m2 * m3 + m3 * m3)
    s2 = math.sqrt(m1 * m1 + m1 * m3 + m3 * m3)
    s3 = math.sqrt(m1 * m1 + m1 * m2 + m2 * m2)

    radii = (s1 * l / M, s2 * l / M, s3 * l / M)
    sin_cos = (
        ((-m2 + m3) / (2.0 * s1), SQRT3 * (m2 + m3) / (2.0 * s1)),
        ((m1 + 2.0 * m3) / (2.0 * s2), -SQRT3 * m1 / (2.0 * s2)),
        (-(m1 + 2.0 * m2) / (2.0 * s3), -SQRT3 * m1 / (2.0 * s3)),
    )
    theta = tuple(_normalize_angle(math.atan2(s, c)) for s, c in sin_cos)
    return PrimaryConfig(T=float(T), l=l, r=radii, theta=theta)


def primary_position(cfg: PrimaryConfig, i, t):
    """r_i (cos(2πt/T + θ_i), sin(2πt/T + θ_i)); i is 1-based."""
    _check_index(i)
    return cfg.position(i, t)


def primary_velocity(cfg: PrimaryConfig, i, t):
    """Time derivative of primary_position; speed (2π/T) r_i."""
    _check_index(i)
    return cfg.velocity(i, t)


def _check_index(i):
    if i not in (1, 2, 3):
        raise ValueError(f"Primary index must be 1, 2 or 3, got {i}")


def potential_U(cfg: PrimaryConfig, masses: Masses, t) -> float:
    """Mutual potential of the primaries, Σ_{i<j} m_i m_j / |q_i − q_j|."""
    q = cfg.positions(t)
    m = masses.as_array()
    total = 0.0
    for i, j in ((0, 1), (0, 2), (1, 2)):
        total = total + m[i] * m[j] / np.linalg.norm(q[i] - q[j], axis=-1)
    return total


def newton_acceleration(cfg: PrimaryConfig, masses: Masses, i, t):
    """Acceleration of primary i from the other two: Σ_{j≠i} m_j (q_j − q_i)/|q_j − q_i|³."""
    _check_index(i)
    m = masses.as_array()
    qi = cfg.position(i, t)
    acc = np.zeros_like(qi)
    for j in (1, 2, 3):
        if j == i:
            continue
        d = cfg.position(j, t) - qi
        dist = np.linalg.norm(d, axis=-1, keepdims=True)
        acc = acc + m[j - 1] * d / dist**3
    return acc


# ============================================================================
# SOURCE FIELD SEEN BY THE SMALL MASS
# ============================================================================

@dataclass(frozen=True)
class PrimaryField:
    """
    Point sources on circular orbits sharing one angular rate.

    A pinned source has radius 0. Sources with zero strength exert no force and
    are ignored by collision guards.
    """
    strengths: np.ndarray
    radii: np.ndarray
    phases: np.ndarray
    omega: float
    period: float
    length_scale: float

    @classmethod
    def from_config(cls, cfg: PrimaryConfig, masses: Masses) -> "PrimaryField":
        return cls(
            strengths=masses.as_array(),
            radii=np.asarray(cfg.r, dtype=float),
            phases=np.asarray(cfg.theta, dtype=float),
            omega=cfg.omega,
            period=cfg.T,
            length_scale=cfg.l,
        )

    @classmethod
    def fixed_center(cls, strength, T) -> "PrimaryField":
        """A single source of the given strength pinned at the origin."""
        if not strength > 0:
            raise ValueError(f"Centre strength must be positive, got {strength}")
        return cls(
            strengths=np.array([float(strength)]),
            radii=np.zeros(1),
            phases=np.zeros(1),
            omega=TWO_PI / T,
            period=float(T),
            length_scale=float(np.cbrt(strength * T * T / (TWO_PI * TWO_PI))),
        )

    def with_strengths(self, strengths) -> "PrimaryField":
        return replace(self, strengths=np.asarray(strengths, dtype=float))

    @property
    def total_strength(self) -> float:
        return float(np.sum(self.strengths))

    @property
    def active(self) -> np.ndarray:
        return self.strengths != 0.0

    def positions(self, t) -> np.ndarray:
        """Array of shape (n_sources, *t.shape, 2)."""
        return np.stack([
            _circle(r, ph, self.omega, t) for r, ph in zip(self.radii, self.phases)
        ])

    def velocities(self, t) -> np.ndarray:
        return np.stack([
            _circle_velocity(r, ph, self.omega, t) for r, ph in zip(self.radii, self.phases)
        ])
