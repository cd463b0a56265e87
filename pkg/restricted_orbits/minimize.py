"""
Action minimization over anti-T/2-symmetric Fourier loops.

Descent runs on the discretized action: closed-form kinetic term plus an
N-point rectangle sum of the potential, N being the grid on which the periodic
quadrature of the potential converges. The gradient of that functional is
exact, so the line search never fights a mismatched derivative.

Steps are preconditioned by the kinetic diagonal (T/2)(2πk/T)², i.e. descent
in the W^{1,2} metric. Initial step lengths come from the Barzilai–Borwein
ratio in the same metric; Armijo backtracking (c = 1e-4, factor 1/2) enforces
a nonincreasing action. Trial steps that bring the loop under the collision
floor, or change its winding about any primary, are cut back as well.
"""

import csv
import logging
import math
from dataclasses import dataclass, field as dataclass_field
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import fft

from .action import DEFAULT_QUADRATURE, QuadratureSettings, discretized_action, periodic_trapezoid
from .bounds import collision_lower_bound_d1, certify_noncollision
from .config import Masses, PrimaryConfig, PrimaryField
from .dynamics import el_residual, periodicity_error
from .errors import (
    CollisionApproach,
    CollisionOnPath,
    NotDescending,
    PointOnCurve,
    SingularityApproach,
    StepTooSmall,
    Undersampled,
)
from .loops import MAX_HARMONICS, FourierLoop, min_separation, separations_on_grid
from .winding import relative_degree

logger = logging.getLogger(__name__)

ARMIJO_C = 1e-4
BACKTRACK = 0.5
MAX_BACKTRACKS = 60
# Relative slack for accepting steps whose decrease is below rounding noise
NOISE_EPS = 100.0 * np.finfo(float).eps
COLLISION_FLOOR_RATIO = 1e-4
COLLISION_RATIO = 1e-12

RESIDUAL_THRESHOLD = 1e-4
PERIODICITY_THRESHOLD = 1e-3

ITERATION_CSV_HEADER = ["iter", "action", "grad_norm", "min_sep1", "min_sep2", "min_sep3", "step"]


class MinimizeOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    K: int = Field(16, ge=1, le=MAX_HARMONICS, description="Retained odd harmonics")
    grad_tol: float = Field(1e-8, gt=0, description="Stop when max |∂f/∂coefficient| falls to this")
    max_iters: int = Field(10000, ge=1)
    collision_floor: Optional[float] = Field(None, gt=0, description="Absolute floor; default 1e-4 · l")
    quadrature: QuadratureSettings = DEFAULT_QUADRATURE
    refine: bool = Field(True, description="Double K until the minimized action settles")
    refine_tol: float = Field(1e-8, gt=0)
    max_harmonics: int = Field(MAX_HARMONICS, ge=1, le=MAX_HARMONICS)

    def floor_for(self, cfg: PrimaryConfig) -> float:
        floor = self.collision_floor if self.collision_floor is not None else COLLISION_FLOOR_RATIO * cfg.l
        if not floor < cfg.l:
            raise ValueError(f"collision_floor {floor} must be below the side length {cfg.l}")
        return floor


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    action: float
    grad_norm: float
    min_separations: tuple
    step: float

    def as_row(self):
        return [self.iteration, repr(self.action), repr(self.grad_norm),
                *(repr(float(s)) for s in self.min_separations), repr(self.step)]


@dataclass(frozen=True)
class MinimizeResult:
    loop: FourierLoop
    action: float
    grad_norm: float
    iterations: int
    min_separations: tuple
    converged: bool
    initial_degree: int = 0
    grad_tol: float = 1e-8
    collision_floor: float = 0.0
    grid_points: int = 0
    history: list = dataclass_field(default_factory=list, compare=False, repr=False)

    def write_history(self, path):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(ITERATION_CSV_HEADER)
            for record in self.history:
                writer.writerow(record.as_row())


class CertificationReport(BaseModel):
    """Bundle of the checks that make a minimizer a collision-free solution."""

    model_config = ConfigDict(frozen=True)

    degree: Optional[int]
    expected_degree: int
    action: float
    d1: float
    margin: float
    min_separations: tuple[float, ...]
    collision_floor: float
    grad_norm: float
    converged: bool
    l2_residual: Optional[float] = None
    max_residual: Optional[float] = None
    periodicity_error: Optional[float] = None
    residual_threshold: float = RESIDUAL_THRESHOLD
    periodicity_threshold: float = PERIODICITY_THRESHOLD
    reasons: list[str] = Field(default_factory=list)

    @property
    def passes(self) -> bool:
        return not self.reasons


# ============================================================================
# DISCRETIZED ACTION AND GRADIENT
# ============================================================================

def kinetic_diagonal(loop: FourierLoop) -> np.ndarray:
    """∂²(½∫|q̇|²)/∂coefficient², laid out like ``FourierLoop.coefficients``."""
    w2 = (loop.omega * loop.harmonics) ** 2
    per_harmonic = np.repeat(0.5 * loop.T * w2, 2)
    return np.concatenate([per_harmonic, per_harmonic])


def field_gradient(loop: FourierLoop, field: PrimaryField, N) -> np.ndarray:
    """Exact gradient of ``discretized_action(loop, field, N)``."""
    if N < 4 * loop.K:
        raise ValueError(f"Gradient grid of {N} points is too coarse for K = {loop.K}")
    times = np.arange(N) * (loop.T / N)
    q = loop.position(times)
    d = q[None] - field.positions(times)
    dist = np.linalg.norm(d, axis=-1)
    active = field.active
    strengths = field.strengths[active, None, None]
    # ∇_q Σ m_i / |q − q_i| on the grid
    pull = -np.sum(strengths * d[active] / dist[active][..., None] ** 3, axis=0)
    spectrum = fft.rfft(pull, axis=0)[loop.harmonics]
    scale = loop.T / N
    kinetic = kinetic_diagonal(loop) * loop.coefficients()
    potential = np.concatenate([(scale * spectrum.real).ravel(), (-scale * spectrum.imag).ravel()])
    return kinetic + potential


def resolve_grid(loop: FourierLoop, field: PrimaryField, qs: QuadratureSettings) -> int:
    """Grid size on which the potential quadrature converges, never below 4K."""
    active = field.active

    def potential(t):
        q = loop.position(t)
        dist = np.linalg.norm(q[None] - field.positions(t)[active], axis=-1)
        return np.sum(field.strengths[active, None] / dist, axis=0)

    start = max(qs.initial_points, 1 << math.ceil(math.log2(4 * loop.K)))
    settings = qs.model_copy(update={"initial_points": start})
    _, points = periodic_trapezoid(potential, loop.T, settings, label="potential grid")
    return points


def _guard_collision(loop, cfg, field):
    separations = min_separation(loop, cfg, sources=field)
    floor = COLLISION_RATIO * field.length_scale
    if np.any(separations[field.active] < floor):
        raise CollisionOnPath(f"Loop separations {separations} reach {floor:.3e}")
    return separations


def action_gradient(loop: FourierLoop, masses: Masses, cfg: PrimaryConfig, qs: QuadratureSettings = DEFAULT_QUADRATURE) -> np.ndarray:
    """Gradient of the discretized action with respect to ``loop.coefficients()``."""
    field = PrimaryField.from_config(cfg, masses)
    _guard_collision(loop, cfg, field)
    return field_gradient(loop, field, resolve_grid(loop, field, qs))


# ============================================================================
# DESCENT
# ============================================================================

def _signature(loop, cfg):
    """Winding degrees about each primary; None if it cannot be computed."""
    try:
        return tuple(relative_degree(loop, cfg, i).degree for i in (1, 2, 3))
    except (PointOnCurve, Undersampled):
        return None


class _Descent:
    """One gradient descent run at fixed K and fixed grid N."""

    def __init__(self, field, cfg, opts, floor, N, signature):
        self.field = field
        self.cfg = cfg
        self.opts = opts
        self.floor = floor
        self.N = N
        self.signature = signature

    def evaluate(self, loop):
        return discretized_action(loop, self.field, self.N), field_gradient(loop, self.field, self.N)

    def admissible(self, loop) -> bool:
        times = np.arange(self.N) * (loop.T / self.N)
        if np.min(separations_on_grid(loop, self.cfg, times)) <= self.floor:
            return False
        return _signature(loop, self.cfg) == self.signature

    def run(self, loop, history, iteration, result_for):
        T = loop.T
        D = kinetic_diagonal(loop)
        x = loop.coefficients()
        f, g = self.evaluate(loop)
        grad_norm = float(np.max(np.abs(g)))
        alpha = 1.0

        while grad_norm > self.opts.grad_tol and iteration < self.opts.max_iters:
            p = -g / D
            slope = float(g @ p)
            step = alpha
            blocked = False
            accepted = None
            for _ in range(MAX_BACKTRACKS):
                trial = FourierLoop.from_coefficients(T, x + step * p)
                if not self.admissible(trial):
                    blocked = True
                    step *= BACKTRACK
                    continue
                f_new, g_new = self.evaluate(trial)
                if f_new <= f + ARMIJO_C * step * slope + NOISE_EPS * max(1.0, abs(f)):
                    accepted = (trial, f_new, g_new)
                    break
                step *= BACKTRACK

            if accepted is None:
                current = FourierLoop.from_coefficients(T, x)
                if blocked:
                    raise CollisionApproach(
                        f"Descent blocked by the collision floor {self.floor:.3e} at iteration {iteration}",
                        result=result_for(current, f, grad_norm, iteration, False),
                    )
                raise NotDescending(
                    f"Line search failed at iteration {iteration} with max gradient {grad_norm:.3e}"
                )

            trial, f_new, g_new = accepted
            s = trial.coefficients() - x
            y = g_new - g
            sy = float(s @ y)
            alpha = float(s @ (D * s)) / sy if sy > 0 else step
            alpha = min(max(alpha, 1e-10), 1e10)

            x, f, g = trial.coefficients(), f_new, g_new
            grad_norm = float(np.max(np.abs(g)))
            iteration += 1
            separations = tuple(min_separation(trial, self.cfg))
            history.append(IterationRecord(iteration, f, grad_norm, separations, step))
            logger.debug("⬇️ [minimize] iter %d action %.12f grad %.3e step %.3e", iteration, f, grad_norm, step)

        return FourierLoop.from_coefficients(T, x), f, grad_norm, iteration


def minimize_action(init: FourierLoop, masses: Masses, cfg: PrimaryConfig, opts: Optional[MinimizeOptions] = None) -> MinimizeResult:
    """
    Gradient descent on the action at fixed K = opts.K.

    Raises CollisionApproach (with the last safe iterate attached) when the
    floor blocks every trial step, NotDescending when the line search fails
    at a nonzero gradient.
    """
    opts = opts or MinimizeOptions()
    field = PrimaryField.from_config(cfg, masses)
    floor = opts.floor_for(cfg)
    loop = init.with_harmonics(opts.K)
    if abs(loop.T - cfg.T) > 1e-12 * cfg.T:
        raise ValueError(f"Loop period {loop.T} differs from the configuration period {cfg.T}")

    separations = min_separation(loop, cfg)
    signature = _signature(loop, cfg)
    initial_degree = signature[0] if signature else 0
    history = []

    def result_for(current, action, grad_norm, iterations, converged, N=0):
        return MinimizeResult(
            loop=current,
            action=float(action),
            grad_norm=float(grad_norm),
            iterations=iterations,
            min_separations=tuple(float(s) for s in min_separation(current, cfg)),
            converged=converged,
            initial_degree=initial_degree,
            grad_tol=opts.grad_tol,
            collision_floor=floor,
            grid_points=N,
            history=history,
        )

    if np.min(separations) <= floor or signature is None:
        raise CollisionApproach(
            f"Initial loop separations {separations} do not clear the floor {floor:.3e}",
            result=None,
        )

    N = resolve_grid(loop, field, opts.quadrature)
    logger.info("🚀 [minimize] K=%d, grid %d, floor %.3e, deg(q − q1) = %d", opts.K, N, floor, initial_degree)
    history.append(IterationRecord(0, discretized_action(loop, field, N),
                                   float(np.max(np.abs(field_gradient(loop, field, N)))), tuple(separations), 0.0))
    iteration = 0
    while True:
        descent = _Descent(field, cfg, opts, floor, N, signature)
        loop, action, grad_norm, iteration = descent.run(loop, history, iteration, result_for)
        finer = resolve_grid(loop, field, opts.quadrature)
        if finer <= N:
            break
        logger.info("🔍 [minimize] potential needs %d points (was %d), continuing", finer, N)
        N = finer

    converged = grad_norm <= opts.grad_tol
    result = result_for(loop, action, grad_norm, iteration, converged, N)
    if converged and min(result.min_separations) <= floor:
        result = result_for(loop, action, grad_norm, iteration, False, N)
    logger.info("%s [minimize] %d iterations, action %.10f, grad %.3e",
                "✅" if result.converged else "⚠️", iteration, action, grad_norm)
    return result


def minimize_with_refinement(init: FourierLoop, masses: Masses, cfg: PrimaryConfig, opts: Optional[MinimizeOptions] = None) -> MinimizeResult:
    """Minimize at opts.K, then keep doubling K while the action still moves by refine_tol."""
    opts = opts or MinimizeOptions()
    result = minimize_action(init, masses, cfg, opts)
    K = opts.K
    while opts.refine and result.converged and 2 * K <= opts.max_harmonics:
        K *= 2
        finer = minimize_action(result.loop, masses, cfg, opts.model_copy(update={"K": K}))
        change = abs(finer.action - result.action)
        logger.info("🔍 [minimize] K=%d changes the action by %.3e", K, change)
        result = finer
        if change < opts.refine_tol:
            break
    return result


# ============================================================================
# CERTIFICATION
# ============================================================================

def certify_minimizer(
    result: MinimizeResult,
    masses: Masses,
    cfg: PrimaryConfig,
    expected_degree: Optional[int] = None,
    step_tol=1e-10,
) -> CertificationReport:
    """
    Winding, d₁ comparison, separations, Euler–Lagrange residual and
    periodicity of one integrated period. Never raises for a failed check;
    every failure is listed in ``reasons``.
    """
    expected = result.initial_degree if expected_degree is None else expected_degree
    reasons = []

    if not result.converged:
        reasons.append(f"not converged (max gradient {result.grad_norm:.3e} > {result.grad_tol:.1e})")

    try:
        degree = relative_degree(result.loop, cfg, 1).degree
    except (PointOnCurve, Undersampled) as e:
        degree = None
        reasons.append(f"winding about primary 1 undefined: {e}")
    if degree is not None and degree != expected:
        reasons.append(f"deg(q − q1) = {degree}, expected {expected}")

    report = collision_lower_bound_d1(masses, cfg.T)
    certificate = certify_noncollision(result.action, report)
    if not certificate.passes:
        reasons.append(f"action {result.action:.9f} is not below d1 = {report.d1:.9f}")

    separations = tuple(float(s) for s in min_separation(result.loop, cfg))
    if min(separations) <= result.collision_floor:
        reasons.append(f"separation {min(separations):.3e} within the collision floor {result.collision_floor:.3e}")

    l2 = worst = period_error = None
    try:
        residual = el_residual(result.loop, masses, cfg, N=max(256, result.grid_points))
        l2, worst = residual.l2_residual, residual.max_residual
        if l2 > RESIDUAL_THRESHOLD:
            reasons.append(f"Euler–Lagrange residual {l2:.3e} above {RESIDUAL_THRESHOLD:.0e}")
    except CollisionOnPath as e:
        reasons.append(f"residual undefined: {e}")

    if result.converged:
        try:
            period_error = periodicity_error(cfg, masses, result.loop, step_tol)
            if period_error > PERIODICITY_THRESHOLD:
                reasons.append(f"periodicity error {period_error:.3e} above {PERIODICITY_THRESHOLD:.0e}")
        except (SingularityApproach, StepTooSmall) as e:
            reasons.append(f"integration failed: {e}")

    return CertificationReport(
        degree=degree,
        expected_degree=expected,
        action=result.action,
        d1=report.d1,
        margin=certificate.margin,
        min_separations=separations,
        collision_floor=result.collision_floor,
        grad_norm=result.grad_norm,
        converged=result.converged,
        l2_residual=l2,
        max_residual=worst,
        periodicity_error=period_error,
        reasons=reasons,
    )
