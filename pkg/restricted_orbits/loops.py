"""
Admissible loops for the small mass.

Three kinds of loop are evaluable at any time:
  - EllipticLoopParams: q̃ − q1 = (a cos(−2πt/T + θ), b sin(−2πt/T + θ)), winds −1 about q1
  - CircularLoopParams: q̄ − q1 = a (cos(2πt/T + θ), sin(2πt/T + θ)), winds +1 about q1
  - FourierLoop: odd harmonics only, so q(t + T/2) = −q(t) holds exactly

The test-loop kinds need the primary configuration to evaluate; Fourier loops
ignore it. ``loop_position`` / ``loop_velocity`` dispatch on the loop kind.
"""

import csv
import json
import math
from dataclasses import dataclass
from functools import singledispatch
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from scipy import fft
from scipy.optimize import minimize_scalar

from .config import TWO_PI, PrimaryConfig, _normalize_angle
from .errors import GridTooCoarse, LoopFormatError

# Default number of retained odd harmonics (1, 3, ..., 31)
DEFAULT_HARMONICS = 16
MAX_HARMONICS = 64

# Absolute tolerance (time units) of the separation refinement
SEPARATION_XTOL = 1e-10


# ============================================================================
# LOOP KINDS
# ============================================================================

class EllipticLoopParams(BaseModel):
    """Elliptic test loop around primary 1 (clockwise relative motion)."""

    model_config = ConfigDict(frozen=True)

    a: float = Field(..., gt=0, description="Semi-axis along x")
    b: float = Field(..., gt=0, description="Semi-axis along y")
    theta: float = Field(0.0, description="Phase in radians, normalized to [0, 2π)")

    @field_validator("theta")
    @classmethod
    def _wrap_theta(cls, value):
        return _normalize_angle(float(value))


class CircularLoopParams(BaseModel):
    """Circular test loop around primary 1 (counter-clockwise relative motion)."""

    model_config = ConfigDict(frozen=True)

    a: float = Field(..., gt=0, description="Radius of the relative circle")
    theta: float = Field(0.0, description="Phase in radians, normalized to [0, 2π)")

    @field_validator("theta")
    @classmethod
    def _wrap_theta(cls, value):
        return _normalize_angle(float(value))


@dataclass(frozen=True)
class FourierLoop:
    """
    Anti-T/2-symmetric planar loop

        q(t) = Σ_k cos_k cos(2πkt/T) + sin_k sin(2πkt/T),  k = 1, 3, ..., 2K−1

    ``cos`` and ``sin`` have shape (K, 2), one 2-vector per odd harmonic.
    """
    T: float
    cos: np.ndarray
    sin: np.ndarray

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise LoopFormatError(f"Loop period must be positive and finite, got {self.T}")
        cos = np.array(self.cos, dtype=float)
        sin = np.array(self.sin, dtype=float)
        if cos.ndim != 2 or cos.shape[1] != 2 or cos.shape[0] < 1 or cos.shape != sin.shape:
            raise LoopFormatError(
                f"Coefficient arrays must both have shape (K, 2), got {cos.shape} and {sin.shape}"
            )
        if not (np.all(np.isfinite(cos)) and np.all(np.isfinite(sin))):
            raise LoopFormatError("Loop coefficients must be finite")
        cos.setflags(write=False)
        sin.setflags(write=False)
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "cos", cos)
        object.__setattr__(self, "sin", sin)

    @classmethod
    def zeros(cls, T, K=DEFAULT_HARMONICS) -> "FourierLoop":
        return cls(T=T, cos=np.zeros((K, 2)), sin=np.zeros((K, 2)))

    @classmethod
    def from_coefficients(cls, T, vector) -> "FourierLoop":
        """Inverse of ``coefficients``: [cos.ravel(), sin.ravel()]."""
        vector = np.asarray(vector, dtype=float)
        K = vector.size // 4
        return cls(T=T, cos=vector[: 2 * K].reshape(K, 2), sin=vector[2 * K:].reshape(K, 2))

    @property
    def K(self) -> int:
        return self.cos.shape[0]

    @property
    def harmonics(self) -> np.ndarray:
        return 2 * np.arange(self.K) + 1

    @property
    def omega(self) -> float:
        return TWO_PI / self.T

    def coefficients(self) -> np.ndarray:
        return np.concatenate([self.cos.ravel(), self.sin.ravel()])

    def basis(self, t):
        """cos(kωt) and sin(kωt) matrices of shape (len(t), K)."""
        phase = self.omega * np.outer(np.atleast_1d(np.asarray(t, dtype=float)), self.harmonics)
        return np.cos(phase), np.sin(phase)

    def position(self, t):
        C, S = self.basis(t)
        return _squeeze(C @ self.cos + S @ self.sin, t)

    def velocity(self, t):
        C, S = self.basis(t)
        w = self.omega * self.harmonics[:, None]
        return _squeeze(C @ (w * self.sin) - S @ (w * self.cos), t)

    def acceleration(self, t):
        C, S = self.basis(t)
        w2 = (self.omega * self.harmonics[:, None]) ** 2
        return _squeeze(-(C @ (w2 * self.cos) + S @ (w2 * self.sin)), t)

    def with_harmonics(self, K) -> "FourierLoop":
        """Truncate or zero-pad to K odd harmonics."""
        cos = np.zeros((K, 2))
        sin = np.zeros((K, 2))
        keep = min(K, self.K)
        cos[:keep] = self.cos[:keep]
        sin[:keep] = self.sin[:keep]
        return FourierLoop(T=self.T, cos=cos, sin=sin)

    def rotated(self, angle) -> "FourierLoop":
        c, s = math.cos(angle), math.sin(angle)
        R = np.array([[c, -s], [s, c]])
        return FourierLoop(T=self.T, cos=self.cos @ R.T, sin=self.sin @ R.T)

    def reversed(self) -> "FourierLoop":
        """Same curve traversed backwards, q(−t)."""
        return FourierLoop(T=self.T, cos=self.cos, sin=-self.sin)


def _squeeze(values, t):
    return values[0] if np.ndim(t) == 0 else values


@dataclass(frozen=True)
class SampledLoop:
    """A loop sampled on the uniform grid t_n = n T / N."""
    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        positions = np.array(self.positions, dtype=float)
        if times.ndim != 1 or times.size < 8:
            raise LoopFormatError(f"A sampled loop needs at least 8 times, got {times.size}")
        if positions.shape != (times.size, 2):
            raise LoopFormatError(f"Positions must have shape ({times.size}, 2), got {positions.shape}")
        steps = np.diff(times)
        if np.any(steps <= 0):
            raise LoopFormatError("Sample times must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise LoopFormatError("Sample times must be uniformly spaced")
        times.setflags(write=False)
        positions.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", positions)

    @property
    def N(self) -> int:
        return self.times.size

    @property
    def T(self) -> float:
        return float((self.times[1] - self.times[0]) * self.N)

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["t", "x", "y"])
            for t, (x, y) in zip(self.times, self.positions):
                writer.writerow([repr(float(t)), repr(float(x)), repr(float(y))])

    @classmethod
    def from_csv(cls, path) -> "SampledLoop":
        with open(path, newline="") as f:
            reader = csv.DictReader(row for row in f if not row.startswith("#"))
            if reader.fieldnames != ["t", "x", "y"]:
                raise LoopFormatError(f"Expected header t,x,y in {path}, got {reader.fieldnames}")
            rows = [(float(r["t"]), float(r["x"]), float(r["y"])) for r in reader]
        data = np.array(rows, dtype=float).reshape(-1, 3)
        return cls(times=data[:, 0], positions=data[:, 1:])


# ============================================================================
# EVALUATION
# ============================================================================

def elliptic_loop_position(p: EllipticLoopParams, cfg: PrimaryConfig, t):
    """q1(t) + (a cos(−2πt/T + θ), b sin(−2πt/T + θ))"""
    phase = -cfg.omega * np.asarray(t, dtype=float) + p.theta
    rel = np.stack([p.a * np.cos(phase), p.b * np.sin(phase)], axis=-1)
    return cfg.position(1, t) + rel


def circular_loop_position(p: CircularLoopParams, cfg: PrimaryConfig, t):
    """q1(t) + a (cos(2πt/T + θ), sin(2πt/T + θ))"""
    phase = cfg.omega * np.asarray(t, dtype=float) + p.theta
    rel = p.a * np.stack([np.cos(phase), np.sin(phase)], axis=-1)
    return cfg.position(1, t) + rel


@singledispatch
def loop_position(loop, cfg, t):
    raise TypeError(f"Not an evaluable loop: {type(loop).__name__}")


@loop_position.register
def _(loop: EllipticLoopParams, cfg, t):
    return elliptic_loop_position(loop, cfg, t)


@loop_position.register
def _(loop: CircularLoopParams, cfg, t):
    return circular_loop_position(loop, cfg, t)


@loop_position.register
def _(loop: FourierLoop, cfg, t):
    return loop.position(t)


@singledispatch
def loop_velocity(loop, cfg, t):
    """Exact analytic time derivative of the loop."""
    raise TypeError(f"Not an evaluable loop: {type(loop).__name__}")


@loop_velocity.register
def _(loop: EllipticLoopParams, cfg, t):
    w = cfg.omega
    phase = -w * np.asarray(t, dtype=float) + loop.theta
    rel = np.stack([loop.a * w * np.sin(phase), -loop.b * w * np.cos(phase)], axis=-1)
    return cfg.velocity(1, t) + rel


@loop_velocity.register
def _(loop: CircularLoopParams, cfg, t):
    w = cfg.omega
    phase = w * np.asarray(t, dtype=float) + loop.theta
    rel = loop.a * w * np.stack([-np.sin(phase), np.cos(phase)], axis=-1)
    return cfg.velocity(1, t) + rel


@loop_velocity.register
def _(loop: FourierLoop, cfg, t):
    return loop.velocity(t)


def loop_period(loop, cfg: Optional[PrimaryConfig] = None) -> float:
    if isinstance(loop, (FourierLoop, SampledLoop)):
        return loop.T
    if cfg is None:
        raise ValueError(f"{type(loop).__name__} needs a primary configuration to evaluate")
    return cfg.T


def sample_loop(loop, cfg, N) -> SampledLoop:
    T = loop_period(loop, cfg)
    times = np.arange(N) * (T / N)
    return SampledLoop(times=times, positions=loop_position(loop, cfg, times))


# ============================================================================
# FOURIER PROJECTION
# ============================================================================

def project_to_fourier(source, K, N, cfg: Optional[PrimaryConfig] = None, T=None) -> FourierLoop:
    """
    Discrete Fourier projection onto the odd harmonics 1, 3, ..., 2K−1.

    ``source`` is any loop kind, or a callable t -> positions together with T.
    The result is anti-T/2-symmetric whatever the source.
    """
    if N < 4 * K:
        raise GridTooCoarse(f"Grid of {N} points cannot resolve {K} odd harmonics (need N >= {4 * K})")
    if callable(source):
        if T is None:
            raise ValueError("A callable source needs an explicit period T")
        period = float(T)
        evaluate = source
    else:
        period = loop_period(source, cfg)
        evaluate = lambda times: loop_position(source, cfg, times)

    times = np.arange(N) * (period / N)
    samples = np.asarray(evaluate(times), dtype=float).reshape(N, 2)
    spectrum = fft.rfft(samples, axis=0) / N
    k = 2 * np.arange(K) + 1
    return FourierLoop(T=period, cos=2.0 * spectrum[k].real, sin=-2.0 * spectrum[k].imag)


# ============================================================================
# SEPARATIONS AND NORMS
# ============================================================================

def separations_on_grid(loop, cfg: Optional[PrimaryConfig], times, sources=None) -> np.ndarray:
    """|q(t) − q_i(t)| for each source, shape (n_sources, len(times)).

    ``sources`` is anything with ``positions(t)``; it defaults to the primaries of ``cfg``.
    """
    sources = cfg if sources is None else sources
    q = loop_position(loop, cfg, times)
    return np.linalg.norm(q[None, :, :] - sources.positions(times), axis=-1)


def min_separation(loop, cfg: Optional[PrimaryConfig], N=256, sources=None) -> np.ndarray:
    """
    Minimum distance from the loop to each primary over one period.

    Grid minimum over N points, refined by a bounded Brent search on the squared
    distance in the two neighbouring grid cells. The search runs over the offset
    from the grid point so the time tolerance stays absolute.
    """
    if N < 64:
        raise ValueError(f"min_separation needs N >= 64, got {N}")
    sources = cfg if sources is None else sources
    T = loop_period(loop, cfg)
    h = T / N
    times = np.arange(N) * h
    grid = separations_on_grid(loop, cfg, times, sources)

    result = np.empty(grid.shape[0])
    for i in range(grid.shape[0]):
        idx = int(np.argmin(grid[i]))
        best = float(grid[i, idx])
        t0 = float(times[idx])

        def squared_distance(s, i=i, t0=t0):
            d = loop_position(loop, cfg, t0 + s) - sources.positions(t0 + s)[i]
            return float(np.dot(d, d))

        refined = minimize_scalar(
            squared_distance,
            bounds=(-h, h),
            method="bounded",
            options={"xatol": SEPARATION_XTOL},
        )
        result[i] = min(best, math.sqrt(max(float(refined.fun), 0.0)))
    return result


def l2_squared(loop: FourierLoop) -> float:
    """∫₀ᵀ |q|² dt in closed form."""
    return 0.5 * loop.T * float(np.sum(loop.cos**2) + np.sum(loop.sin**2))


def velocity_l2_squared(loop: FourierLoop) -> float:
    """∫₀ᵀ |q̇|² dt in closed form."""
    w2 = (loop.omega * loop.harmonics[:, None]) ** 2
    return 0.5 * loop.T * float(np.sum(w2 * loop.cos**2) + np.sum(w2 * loop.sin**2))


def sobolev_norm(loop: FourierLoop) -> float:
    """W^{1,2} norm (∫|q|²)^{1/2} + (∫|q̇|²)^{1/2}."""
    return math.sqrt(l2_squared(loop)) + math.sqrt(velocity_l2_squared(loop))


# ============================================================================
# FILE FORMAT
# ============================================================================

class FourierLoopFile(BaseModel):
    """On-disk JSON form: {T, K, cos: [[cx, cy], ...], sin: [[sx, sy], ...]}."""

    T: float = Field(..., gt=0)
    K: int = Field(..., ge=1)
    cos: list[tuple[float, float]]
    sin: list[tuple[float, float]]
    harmonics: Optional[list[int]] = Field(
        None, description="Optional explicit harmonic list; must be 1, 3, ..., 2K−1"
    )

    @model_validator(mode="after")
    def _check_layout(self):
        if len(self.cos) != self.K or len(self.sin) != self.K:
            raise ValueError(
                f"cos and sin must each hold K = {self.K} entries, got {len(self.cos)} and {len(self.sin)}"
            )
        if self.harmonics is not None:
            even = [k for k in self.harmonics if k % 2 == 0]
            if even:
                raise ValueError(f"symmetry violation: even harmonics {even} break q(t + T/2) = −q(t)")
            expected = [2 * j + 1 for j in range(self.K)]
            if list(self.harmonics) != expected:
                raise ValueError(f"harmonics must be {expected[:3]}... ascending odd, got {self.harmonics}")
        return self


def fourier_loop_to_dict(loop: FourierLoop) -> dict:
    return {
        "T": loop.T,
        "K": loop.K,
        "cos": loop.cos.tolist(),
        "sin": loop.sin.tolist(),
    }


def fourier_loop_from_dict(data) -> FourierLoop:
    try:
        parsed = FourierLoopFile.model_validate(data)
    except ValidationError as e:
        raise LoopFormatError(describe_validation_error(e)) from e
    return FourierLoop(T=parsed.T, cos=np.array(parsed.cos), sin=np.array(parsed.sin))


def write_fourier_loop(loop: FourierLoop, path):
    Path(path).write_text(json.dumps(fourier_loop_to_dict(loop), indent=2) + "\n")


def read_fourier_loop(path) -> FourierLoop:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise LoopFormatError(f"{path}: {e.strerror}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise LoopFormatError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from e
    return fourier_loop_from_dict(data)


def describe_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item["loc"]) or "<root>"
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)
