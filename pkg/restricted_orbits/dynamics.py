"""
Equation of motion of the small mass

    q̈ = Σ_i m_i (q_i(t) − q) / |q_i(t) − q|³

its time integration (classical RK4, step doubling until the endpoint settles),
and the residual / periodicity checks used to certify a loop as a solution.
"""

import csv
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .config import Masses, PrimaryConfig, PrimaryField
from .errors import CollisionOnPath, CollisionSingularity, SingularityApproach, StepTooSmall
from .loops import FourierLoop, min_separation

logger = logging.getLogger(__name__)

SINGULAR_RATIO = 1e-12      # rhs refuses separations at or below this · l
APPROACH_RATIO = 1e-6       # integration aborts below this · l
MIN_STEP_RATIO = 1e-12      # smallest admissible step · T
INITIAL_STEPS = 64
DEFAULT_STEP_TOL = 1e-10


@dataclass(frozen=True)
class State:
    position: np.ndarray
    velocity: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        position = np.asarray(self.position, dtype=float).reshape(2)
        velocity = np.asarray(self.velocity, dtype=float).reshape(2)
        if not (np.all(np.isfinite(position)) and np.all(np.isfinite(velocity)) and math.isfinite(self.time)):
            raise ValueError("State components must be finite")
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "velocity", velocity)
        object.__setattr__(self, "time", float(self.time))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])

    @classmethod
    def from_vector(cls, y, time) -> "State":
        return cls(position=y[:2], velocity=y[2:], time=time)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n, 4): x, y, vx, vy

    def __len__(self):
        return self.times.size

    def __getitem__(self, index) -> State:
        return State.from_vector(self.states[index], self.times[index])

    @property
    def final(self) -> State:
        return self[-1]

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["t", "x", "y", "vx", "vy"])
            for t, row in zip(self.times, self.states):
                writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])


class ResidualReport(BaseModel):
    """Euler–Lagrange residual, normalized by (2π/T)²·l."""

    model_config = ConfigDict(frozen=True)

    l2_residual: float = Field(..., ge=0)
    max_residual: float = Field(..., ge=0)
    periodicity_error: Optional[float] = Field(None, ge=0)


# ============================================================================
# FORCE FIELD
# ============================================================================

def _field(cfg: PrimaryConfig, masses: Masses, field: Optional[PrimaryField]) -> PrimaryField:
    return PrimaryField.from_config(cfg, masses) if field is None else field


def _acceleration(field: PrimaryField, t, q):
    """(acceleration, smallest separation to an active source) at a single time."""
    sources = field.positions(t)[field.active]
    if sources.shape[0] == 0:
        return np.zeros(2), math.inf
    d = sources - q
    dist = np.hypot(d[:, 0], d[:, 1])
    strengths = field.strengths[field.active]
    acc = np.sum((strengths / dist**3)[:, None] * d, axis=0)
    return acc, float(np.min(dist))


def rhs(cfg: PrimaryConfig, masses: Masses, t, state: State, field: Optional[PrimaryField] = None) -> np.ndarray:
    """Σ_i m_i (q_i(t) − q) / |q_i(t) − q|³"""
    field = _field(cfg, masses, field)
    floor = SINGULAR_RATIO * field.length_scale
    sources = field.positions(t)[field.active]
    if sources.shape[0]:
        closest = float(np.min(np.hypot(*(sources - state.position).T)))
        if closest <= floor:
            raise CollisionSingularity(f"Position {state.position} is {closest:.3e} from a primary at t={t}")
    acc, _ = _acceleration(field, t, state.position)
    return acc


def jacobi_constant(state: State, field: PrimaryField) -> float:
    """½|v|² − ω (x v_y − y v_x) − Σ m_i / |q − q_i|, conserved along solutions."""
    q, v = state.position, state.velocity
    sources = field.positions(state.time)[field.active]
    dist = np.hypot(*(sources - q).T) if sources.shape[0] else np.zeros(0)
    potential = float(np.sum(field.strengths[field.active] / dist))
    angular = q[0] * v[1] - q[1] * v[0]
    return 0.5 * float(v @ v) - field.omega * angular - potential


# ============================================================================
# INTEGRATION
# ============================================================================

def _rk4_run(field: PrimaryField, y0, t0, t_end, n_steps, floor):
    """n_steps classical RK4 steps; returns (times, states)."""
    h = (t_end - t0) / n_steps

    def f(t, y):
        acc, closest = _acceleration(field, t, y[:2])
        if closest < floor:
            raise SingularityApproach(f"Separation {closest:.3e} below {floor:.3e} at t={t:.6g}")
        return np.concatenate([y[2:], acc])

    times = t0 + h * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1, 4))
    states[0] = y = np.asarray(y0, dtype=float)
    for n in range(n_steps):
        t = times[n]
        k1 = f(t, y)
        k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        states[n + 1] = y
    return times, states


def integrate(
    cfg: PrimaryConfig,
    masses: Masses,
    s0: State,
    t_end,
    step_tol=DEFAULT_STEP_TOL,
    field: Optional[PrimaryField] = None,
) -> Trajectory:
    """
    Fixed-step RK4 from s0 to t_end. The step count doubles from 64 until the
    endpoint moves by at most step_tol; the finer run is returned.
    """
    field = _field(cfg, masses, field)
    if not step_tol > 0:
        raise ValueError(f"step_tol must be positive, got {step_tol}")
    rhs(cfg, masses, s0.time, s0, field)

    floor = APPROACH_RATIO * field.length_scale
    min_step = MIN_STEP_RATIO * field.period
    span = t_end - s0.time
    y0 = s0.as_vector()

    n = INITIAL_STEPS
    _, coarse = _rk4_run(field, y0, s0.time, t_end, n, floor)
    while True:
        if abs(span) / (2 * n) < min_step:
            raise StepTooSmall(f"Step {abs(span) / (2 * n):.3e} fell below {min_step:.3e}")
        times, fine = _rk4_run(field, y0, s0.time, t_end, 2 * n, floor)
        change = float(np.max(np.abs(fine[-1] - coarse[-1])))
        if change <= step_tol:
            logger.debug("🛰️ [integrate] %d steps, endpoint change %.2e", 2 * n, change)
            return Trajectory(times=times, states=fine)
        n *= 2
        coarse = fine


def loop_initial_state(loop: FourierLoop) -> State:
    return State(position=loop.position(0.0), velocity=loop.velocity(0.0), time=0.0)


def field_periodicity_error(loop: FourierLoop, field: PrimaryField, step_tol=DEFAULT_STEP_TOL, cfg=None, masses=None) -> float:
    """max(|Δx| / l, |Δv| T / (2π l)) after one period of free integration."""
    s0 = loop_initial_state(loop)
    trajectory = integrate(cfg, masses, s0, s0.time + loop.T, step_tol, field)
    end = trajectory.final
    l = field.length_scale
    dx = float(np.linalg.norm(end.position - s0.position))
    dv = float(np.linalg.norm(end.velocity - s0.velocity))
    return max(dx / l, dv * loop.T / (2.0 * math.pi * l))


def periodicity_error(cfg: PrimaryConfig, masses: Masses, loop: FourierLoop, step_tol=DEFAULT_STEP_TOL) -> float:
    return field_periodicity_error(loop, PrimaryField.from_config(cfg, masses), step_tol, cfg, masses)


# ============================================================================
# EULER–LAGRANGE RESIDUAL
# ============================================================================

def field_residual(loop: FourierLoop, field: PrimaryField, N=256) -> ResidualReport:
    separations = min_separation(loop, None, max(N, 64), sources=field)
    floor = SINGULAR_RATIO * field.length_scale
    if np.any(separations[field.active] < floor):
        raise CollisionOnPath(f"Loop separations {separations} reach the collision floor {floor:.3e}")

    times = np.arange(N) * (loop.T / N)
    q = loop.position(times)
    d = field.positions(times) - q[None]
    dist = np.linalg.norm(d, axis=-1)
    strengths = field.strengths[:, None, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        pulls = np.where(strengths != 0.0, strengths * d / dist[..., None] ** 3, 0.0)
    residual = loop.acceleration(times) - np.sum(pulls, axis=0)

    scale = field.omega**2 * field.length_scale
    norms = np.linalg.norm(residual, axis=-1)
    return ResidualReport(
        l2_residual=float(np.sqrt(np.mean(norms**2))) / scale,
        max_residual=float(np.max(norms)) / scale,
    )


def el_residual(loop: FourierLoop, masses: Masses, cfg: PrimaryConfig, N=256) -> ResidualReport:
    """q̈ (spectral) minus the gravitational pull, on N grid points."""
    return field_residual(loop, PrimaryField.from_config(cfg, masses), N)
