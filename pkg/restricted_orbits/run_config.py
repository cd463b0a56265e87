"""
Run configuration for the ``minimize`` and ``verify`` pipelines.

A run is described by a JSON file mirroring ``RunConfig``:

    {
      "masses": {"m1": 1.0, "m2": 1.0, "m3": 1.0},
      "T": 1.0,
      "loop": {"kind": "elliptic", "a": 0.19, "b": 0.69, "theta": "pi/20"},
      "options": {"K": 16, "grad_tol": 1e-8},
      "outputs": {"directory": "runs/table2"}
    }

Angles accept plain numbers or symbolic multiples of π ("pi", "pi/20", "3*pi/4").
"""

import json
import math
import re
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .config import Masses
from .errors import ConfigError
from .loops import CircularLoopParams, EllipticLoopParams, describe_validation_error
from .minimize import MinimizeOptions

_SYMBOLIC_ANGLE = re.compile(r"^(?:(?P<num>\d+(?:\.\d+)?)\s*\*\s*)?pi(?:\s*/\s*(?P<den>\d+(?:\.\d+)?))?$")


def parse_angle(value) -> float:
    """Number, numeric string, or symbolic multiple of π → radians."""
    if isinstance(value, bool):
        raise ValueError(f"Not an angle: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"Not an angle: {value!r}")
    text = value.strip().lower().replace("π", "pi")
    sign = 1.0
    if text.startswith("-"):
        sign, text = -1.0, text[1:].strip()
    match = _SYMBOLIC_ANGLE.match(text)
    if match:
        num = float(match.group("num") or 1.0)
        den = float(match.group("den") or 1.0)
        if den == 0.0:
            raise ValueError(f"Zero denominator in angle {value!r}")
        return sign * math.pi * num / den
    try:
        return sign * float(text)
    except ValueError:
        raise ValueError(f"Cannot read {value!r} as an angle (try 'pi/20' or 0.157)") from None


class EllipticLoopConfig(EllipticLoopParams):
    kind: Literal["elliptic"]

    @field_validator("theta", mode="before")
    @classmethod
    def _symbolic_theta(cls, value):
        return parse_angle(value)

    def params(self) -> EllipticLoopParams:
        return EllipticLoopParams(a=self.a, b=self.b, theta=self.theta)


class CircularLoopConfig(CircularLoopParams):
    kind: Literal["circular"]

    @field_validator("theta", mode="before")
    @classmethod
    def _symbolic_theta(cls, value):
        return parse_angle(value)

    def params(self) -> CircularLoopParams:
        return CircularLoopParams(a=self.a, theta=self.theta)


class FourierLoopConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["fourier"]
    path: str = Field(..., description="JSON file {T, K, cos, sin}")


LoopConfig = Annotated[
    Union[EllipticLoopConfig, CircularLoopConfig, FourierLoopConfig],
    Field(discriminator="kind"),
]


class OutputPaths(BaseModel):
    model_config = ConfigDict(frozen=True)

    directory: str = "."
    report: str = "report.json"
    loop: str = "loop.json"
    samples: Optional[str] = "loop.csv"
    iterations: Optional[str] = "iterations.csv"
    sample_points: int = Field(256, ge=8)

    def path(self, name) -> Optional[Path]:
        value = getattr(self, name)
        return None if value is None else Path(self.directory) / value


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    masses: Masses
    T: float = Field(1.0, gt=0, description="Period of the primaries and the loop")
    loop: LoopConfig
    options: MinimizeOptions = MinimizeOptions()
    outputs: OutputPaths = OutputPaths()
    step_tol: float = Field(1e-10, gt=0, description="Endpoint tolerance of the periodicity integration")


def run_config_from_dict(data) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(describe_validation_error(e)) from e


def load_run_config(path) -> RunConfig:
    """Parse a RunConfig JSON file; errors carry the JSON position or field path."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from e
    try:
        return run_config_from_dict(data)
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from e.__cause__
