"""
Lagrangian action of the small mass

    f(q) = ∫₀ᵀ ½|q̇|² + Σ_i m_i / |q − q_i| dt

evaluated directly, through the per-primary decomposition, and through the
reduced expressions d₂ (elliptic test loops) and d₃ (circular test loops).

All integrands are smooth and T-periodic away from collisions, so every
integral is a periodic trapezoid sum with grid doubling.
"""

import logging
import math
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .config import TWO_PI, Masses, PrimaryConfig, PrimaryField
from .errors import CollisionOnPath, NoConvergence
from .loops import (
    CircularLoopParams,
    EllipticLoopParams,
    FourierLoop,
    loop_period,
    loop_position,
    loop_velocity,
    min_separation,
    velocity_l2_squared,
)

logger = logging.getLogger(__name__)

# Separations below COLLISION_RATIO * l are treated as collisions
COLLISION_RATIO = 1e-12

D2Reading = Literal["corrected", "printed"]


class QuadratureSettings(BaseModel):
    """Periodic trapezoid settings shared by every action evaluator."""

    model_config = ConfigDict(frozen=True)

    abs_tol: float = Field(1e-9, gt=0, description="Stop when successive estimates differ by at most this")
    max_doublings: int = Field(20, ge=0, description="Grid doublings allowed after the initial grid")
    initial_points: int = Field(64, ge=16, description="Initial grid size, a power of two")

    @field_validator("initial_points")
    @classmethod
    def _power_of_two(cls, value):
        if value & (value - 1):
            raise ValueError(f"initial_points must be a power of two, got {value}")
        return value


DEFAULT_QUADRATURE = QuadratureSettings()


class ActionBreakdown(BaseModel):
    """Kinetic part, one potential part per source, and their sum."""

    model_config = ConfigDict(frozen=True)

    kinetic: float = Field(..., ge=0)
    potential: tuple[float, ...]
    total: float
    points: int = Field(0, ge=0, description="Grid size at which the quadrature converged")


# ============================================================================
# QUADRATURE
# ============================================================================

def periodic_trapezoid(integrand, T, qs: QuadratureSettings = DEFAULT_QUADRATURE, label="integral"):
    """
    ∫₀ᵀ integrand(t) dt for a smooth T-periodic integrand.

    ``integrand`` maps an array of times to an array of values whose last axis
    runs over time; leading axes are integrated componentwise and convergence
    is judged on their sum. Returns (values, points).
    """
    n = qs.initial_points
    h = T / n
    estimate = h * np.sum(integrand(np.arange(n) * h), axis=-1)

    for _ in range(qs.max_doublings):
        midpoints = (np.arange(n) + 0.5) * h
        refined = 0.5 * estimate + 0.5 * h * np.sum(integrand(midpoints), axis=-1)
        n *= 2
        h *= 0.5
        change = abs(float(np.sum(refined)) - float(np.sum(estimate)))
        estimate = refined
        if change <= qs.abs_tol:
            logger.debug("🔢 [quadrature] %s converged on %d points (change %.2e)", label, n, change)
            return estimate, n

    raise NoConvergence(
        f"{label}: no convergence to {qs.abs_tol:g} after {qs.max_doublings} doublings ({n} points)"
    )


def _check_clearance(loop, cfg, field: PrimaryField):
    separations = min_separation(loop, cfg, sources=field)
    floor = COLLISION_RATIO * field.length_scale
    for index in np.flatnonzero(field.active):
        if separations[index] < floor:
            raise CollisionOnPath(
                f"Loop passes within {separations[index]:.3e} of primary {index + 1} (floor {floor:.3e})"
            )
    return separations


# ============================================================================
# DIRECT ACTION
# ============================================================================

def field_action(
    loop,
    field: PrimaryField,
    qs: QuadratureSettings = DEFAULT_QUADRATURE,
    cfg: Optional[PrimaryConfig] = None,
) -> ActionBreakdown:
    """Action of ``loop`` in an arbitrary source field (pinned or rotating sources)."""
    _check_clearance(loop, cfg, field)
    strengths = field.strengths[:, None]

    def integrand(t):
        q = loop_position(loop, cfg, t)
        v = loop_velocity(loop, cfg, t)
        distances = np.linalg.norm(q[None, :, :] - field.positions(t), axis=-1)
        kinetic = 0.5 * np.sum(v * v, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            potential = np.where(strengths != 0.0, strengths / distances, 0.0)
        return np.vstack([kinetic[None, :], potential])

    values, points = periodic_trapezoid(integrand, loop_period(loop, cfg), qs, label="action")
    kinetic = float(values[0])
    potential = tuple(float(v) for v in values[1:])
    return ActionBreakdown(kinetic=kinetic, potential=potential, total=kinetic + sum(potential), points=points)


def action_direct(loop, masses: Masses, cfg: PrimaryConfig, qs: QuadratureSettings = DEFAULT_QUADRATURE) -> ActionBreakdown:
    """∫₀ᵀ ½|q̇|² + Σ m_i/|q − q_i| dt by periodic quadrature."""
    return field_action(loop, PrimaryField.from_config(cfg, masses), qs, cfg)


def kepler_action(loop: FourierLoop, strength, qs: QuadratureSettings = DEFAULT_QUADRATURE) -> float:
    """Action of ``loop`` around a single pinned source of the given strength."""
    field = PrimaryField.fixed_center(strength, loop.T)
    return field_action(loop, field, qs).total


def discretized_action(loop: FourierLoop, field: PrimaryField, N) -> float:
    """Closed-form kinetic term plus an N-point rectangle sum of the potential."""
    times = np.arange(N) * (loop.T / N)
    q = loop.position(times)
    distances = np.linalg.norm(q[None, :, :] - field.positions(times), axis=-1)
    active = field.active
    potential = np.sum(field.strengths[active, None] / distances[active])
    return 0.5 * velocity_l2_squared(loop) + (loop.T / N) * float(potential)


# ============================================================================
# DECOMPOSED FORM
# ============================================================================

def action_decomposed(loop, masses: Masses, cfg: PrimaryConfig, qs: QuadratureSettings = DEFAULT_QUADRATURE) -> float:
    """
    (1/M) Σ_i ∫ m_i [½|q̇ − q̇_i|² + M/|q − q_i|] dt − (1/2M) ∫ Σ_i m_i |q̇_i|² dt

    Equal to the direct action because Σ m_i q̇_i = 0.
    """
    field = PrimaryField.from_config(cfg, masses)
    _check_clearance(loop, cfg, field)
    m = masses.as_array()[:, None]
    M = masses.M

    def integrand(t):
        q = loop_position(loop, cfg, t)
        v = loop_velocity(loop, cfg, t)
        qi = cfg.positions(t)
        vi = cfg.velocities(t)
        relative_speed2 = np.sum((v[None] - vi) ** 2, axis=-1)
        distances = np.linalg.norm(q[None] - qi, axis=-1)
        two_body = np.sum(m * (0.5 * relative_speed2 + M / distances), axis=0) / M
        primaries = np.sum(m * np.sum(vi * vi, axis=-1), axis=0) / (2.0 * M)
        return two_body - primaries

    value, _ = periodic_trapezoid(integrand, loop_period(loop, cfg), qs, label="decomposed action")
    return float(value)


def primary_kinetic_term(masses: Masses, cfg: PrimaryConfig, qs: QuadratureSettings = DEFAULT_QUADRATURE) -> float:
    """−(1/2M) ∫₀ᵀ Σ_i m_i |q̇_i|² dt"""
    m = masses.as_array()[:, None]

    def integrand(t):
        vi = cfg.velocities(t)
        return -np.sum(m * np.sum(vi * vi, axis=-1), axis=0) / (2.0 * masses.M)

    value, _ = periodic_trapezoid(integrand, cfg.T, qs, label="primary kinetic term")
    return float(value)


def primary_kinetic_closed_form(masses: Masses, T) -> float:
    """−½ (2π)^{2/3} (m1 m2 + m1 m3 + m2 m3) M^{−4/3} T^{1/3}"""
    return -0.5 * TWO_PI ** (2.0 / 3.0) * masses.pair_sum * masses.M ** (-4.0 / 3.0) * T ** (1.0 / 3.0)


# ============================================================================
# REDUCED TEST-LOOP EXPRESSIONS
# ============================================================================

def _prefactor_common(masses: Masses, cfg: PrimaryConfig):
    """Terms of the reduced kinetic prefactor that depend on the primaries only."""
    m1, m2, m3 = masses.m1, masses.m2, masses.m3
    M = masses.M
    r1, r2, r3 = cfg.r
    th1, th2, th3 = cfg.theta
    return (
        (m2 + m3 - m1) / M * r1 * r1
        - (2.0 * m2 * r2 * math.cos(th2 - th1) + 2.0 * m3 * r3 * math.cos(th3 - th1)) / M * r1
    )


def _elliptic_distance_squared(p: EllipticLoopParams, cfg: PrimaryConfig, i, t, reading: D2Reading):
    """|q̃ − q_i|² for i ∈ {2, 3} in the expanded trigonometric form."""
    a, b, th = p.a, p.b, p.theta
    r1, ri = cfg.r[0], cfg.r[i - 1]
    th1, thi = cfg.theta[0], cfg.theta[i - 1]
    # The constant cross term of primary 3 reads θ₂ − θ₁ in the printed derivation
    th_cross = cfg.theta[1] if (i == 3 and reading == "printed") else thi
    wt = 2.0 * TWO_PI * np.asarray(t, dtype=float) / cfg.T
    return (
        0.5 * (a * a + b * b)
        + 0.5 * (a * a - b * b) * np.cos(wt - 2.0 * th)
        + r1 * r1 + ri * ri - 2.0 * r1 * ri * math.cos(th_cross - th1)
        + (a + b) * (r1 * np.cos(wt + th1 - th) - ri * np.cos(wt + thi - th))
        + (a - b) * (r1 * math.cos(th1 + th) - ri * math.cos(thi + th))
    )


def action_d2(
    p: EllipticLoopParams,
    masses: Masses,
    cfg: PrimaryConfig,
    qs: QuadratureSettings = DEFAULT_QUADRATURE,
    reading: D2Reading = "corrected",
) -> float:
    """
    d₂(a, b, θ): explicit kinetic prefactor plus three one-dimensional integrals.

    ``reading="printed"`` reproduces the cos(θ₂ − θ₁) constant in the primary-3
    distance as typeset; the default uses the geometrically correct θ₃ − θ₁.
    """
    if reading not in ("corrected", "printed"):
        raise ValueError(f"reading must be 'corrected' or 'printed', got {reading!r}")
    _check_clearance(p, cfg, PrimaryField.from_config(cfg, masses))
    m1, m2, m3 = masses.m1, masses.m2, masses.m3
    M = masses.M
    a, b, th = p.a, p.b, p.theta
    r1, r2, r3 = cfg.r
    th1, th2, th3 = cfg.theta

    bracket = (
        0.5 * (a * a + b * b)
        + _prefactor_common(masses, cfg)
        + m2 * (a - b) / M * (r1 * math.cos(th1 + th) - r2 * math.cos(th2 + th))
        + m3 * (a - b) / M * (r1 * math.cos(th1 + th) - r3 * math.cos(th3 + th))
    )
    prefactor = 2.0 * math.pi**2 / cfg.T * bracket

    def integrand(t):
        wt = 2.0 * TWO_PI * np.asarray(t, dtype=float) / cfg.T
        own = 0.5 * (a * a + b * b) + 0.5 * (a * a - b * b) * np.cos(wt - 2.0 * th)
        return np.vstack([
            m1 / np.sqrt(own),
            m2 / np.sqrt(_elliptic_distance_squared(p, cfg, 2, t, reading)),
            m3 / np.sqrt(_elliptic_distance_squared(p, cfg, 3, t, reading)),
        ])

    integrals, _ = periodic_trapezoid(integrand, cfg.T, qs, label=f"d2 ({reading})")
    return prefactor + float(np.sum(integrals))


def action_d3(p: CircularLoopParams, masses: Masses, cfg: PrimaryConfig, qs: QuadratureSettings = DEFAULT_QUADRATURE) -> float:
    """d₃(a, θ): explicit prefactor + m1 T/a + two one-dimensional integrals."""
    _check_clearance(p, cfg, PrimaryField.from_config(cfg, masses))
    m1, m2, m3 = masses.m1, masses.m2, masses.m3
    M = masses.M
    a, th = p.a, p.theta
    r1, r2, r3 = cfg.r
    th1, th2, th3 = cfg.theta

    bracket = (
        a * a
        + _prefactor_common(masses, cfg)
        + 2.0 * (m2 + m3) / M * a * r1 * math.cos(th1 - th)
        - (2.0 * m2 * r2 * math.cos(th2 - th) + 2.0 * m3 * r3 * math.cos(th3 - th)) / M * a
    )
    prefactor = 2.0 * math.pi**2 / cfg.T * bracket + m1 * cfg.T / a

    def distance_squared(i):
        ri, thi = cfg.r[i - 1], cfg.theta[i - 1]
        return (
            a * a + r1 * r1 + ri * ri
            - 2.0 * r1 * ri * math.cos(thi - th1)
            + 2.0 * a * r1 * math.cos(th1 - th)
            - 2.0 * a * ri * math.cos(thi - th)
        )

    h2, h3 = distance_squared(2), distance_squared(3)

    def integrand(t):
        ones = np.ones_like(np.asarray(t, dtype=float))
        return np.vstack([m2 / math.sqrt(h2) * ones, m3 / math.sqrt(h3) * ones])

    integrals, _ = periodic_trapezoid(integrand, cfg.T, qs, label="d3")
    return prefactor + float(np.sum(integrals))
