"""
Winding number of a closed planar curve about a point.

The degree is the sum of the signed angle increments of x(t) − p between
consecutive samples (closing the curve), divided by 2π. Increments are taken
from the argument of the complex ratio z_{n+1} / z_n, which lies in (−π, π].
"""

import logging
import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from .config import PrimaryConfig
from .errors import PointOnCurve, Undersampled
from .loops import SampledLoop, loop_period, loop_position

logger = logging.getLogger(__name__)

MIN_SAMPLES = 64
MAX_SAMPLES = 2**16
MAX_INCREMENT = 0.5 * math.pi
ON_CURVE_RATIO = 1e-12
INTEGER_TOL = 1e-6


class WindingResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    degree: int
    # largest single-step |angle increment| observed, radians
    min_angular_margin: float
    samples: int


def _winding_of_points(points: np.ndarray, p) -> tuple[float, float]:
    """(turns, largest |increment|) of the closed polygon ``points`` about p."""
    z = (points[:, 0] - p[0]) + 1j * (points[:, 1] - p[1])
    closed = np.append(z, z[0])
    increments = np.angle(closed[1:] / closed[:-1])
    return float(np.sum(increments)) / (2.0 * math.pi), float(np.max(np.abs(increments)))


def _check_clearance(points: np.ndarray, p):
    span = np.max(points, axis=0) - np.min(points, axis=0)
    diameter = float(np.hypot(span[0], span[1]))
    closest = float(np.min(np.hypot(points[:, 0] - p[0], points[:, 1] - p[1])))
    if closest <= ON_CURVE_RATIO * diameter or closest == 0.0:
        raise PointOnCurve(f"Point {tuple(p)} lies within {closest:.3e} of the curve (diameter {diameter:.3e})")


def _finish(turns, largest, samples) -> WindingResult:
    degree = int(round(turns))
    if abs(turns - degree) > INTEGER_TOL:
        logger.warning("⚠️ [winding] %.9f turns is not within %.0e of an integer", turns, INTEGER_TOL)
    return WindingResult(degree=degree, min_angular_margin=largest, samples=samples)


def winding_number(curve, p=(0.0, 0.0), N=256, cfg: Optional[PrimaryConfig] = None, T=None) -> WindingResult:
    """
    Degree of ``curve`` about ``p``.

    ``curve`` is a SampledLoop (used as given), any evaluable loop kind (sampled
    on N points, ``cfg`` needed for the test-loop kinds), or a callable
    t -> positions together with its period ``T``. Evaluable curves are
    resampled with twice the points while any increment reaches π/2.
    """
    p = np.asarray(p, dtype=float)
    if isinstance(curve, SampledLoop):
        if curve.N < MIN_SAMPLES:
            raise ValueError(f"winding_number needs at least {MIN_SAMPLES} samples, got {curve.N}")
        _check_clearance(curve.positions, p)
        turns, largest = _winding_of_points(curve.positions, p)
        if largest >= MAX_INCREMENT:
            raise Undersampled(f"Angle increment {largest:.3f} rad on {curve.N} fixed samples")
        return _finish(turns, largest, curve.N)

    if N < MIN_SAMPLES:
        raise ValueError(f"winding_number needs at least {MIN_SAMPLES} samples, got {N}")
    if callable(curve):
        if T is None:
            raise ValueError("A callable curve needs an explicit period T")
        period, evaluate = float(T), curve
    else:
        period = loop_period(curve, cfg)
        evaluate = lambda times: loop_position(curve, cfg, times)

    n = N
    while True:
        points = np.asarray(evaluate(np.arange(n) * (period / n)), dtype=float)
        _check_clearance(points, p)
        turns, largest = _winding_of_points(points, p)
        if largest < MAX_INCREMENT:
            return _finish(turns, largest, n)
        if 2 * n > MAX_SAMPLES:
            raise Undersampled(f"Angle increment {largest:.3f} rad still at {n} samples")
        logger.debug("🔁 [winding] increment %.3f rad on %d samples, resampling", largest, n)
        n *= 2


def relative_degree(loop, cfg: PrimaryConfig, i=1, N=256) -> WindingResult:
    """deg(q − q_i): winding of the relative curve about the origin."""
    if i not in (1, 2, 3):
        raise ValueError(f"Primary index must be 1, 2 or 3, got {i}")
    T = loop_period(loop, cfg)

    def relative(times):
        return loop_position(loop, cfg, times) - cfg.position(i, times)

    return winding_number(relative, (0.0, 0.0), N=N, T=T)
