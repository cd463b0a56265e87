"""
Reference test-loop tables and their recomputation.

Tables 1 and 2 hold elliptic loops (winding −1 about primary 1), Tables 3 and 4
circular loops (winding +1). T = 1 throughout; Tables 2 and 4 use equal unit
masses, Tables 1 and 3 have M = 1. Angles are kept as fractions of π.
"""

import logging
import math
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from .action import DEFAULT_QUADRATURE, QuadratureSettings, action_d2, action_d3
from .bounds import collision_lower_bound_d1
from .config import lagrange_orbits, masses_new
from .errors import RestrictedOrbitsError
from .loops import CircularLoopParams, EllipticLoopParams

logger = logging.getLogger(__name__)

TABLE_PERIOD = 1.0
TABLE_IDS = (1, 2, 3, 4)
ELLIPTIC_TABLES = (1, 2)

D1_TOLERANCE = 1e-6
D_TOLERANCE = {1: 1e-4, 2: 5e-6, 3: 5e-6, 4: 5e-6}
# Table 1 confirms the corrected primary-3 term when every row lands this close
TYPO_CONFIRMATION_TOLERANCE = 1e-5

# Printed d₂ values that a 30-digit evaluation of the direct action does not
# reproduce (off by 7.9e-6 to 4.9e-5); keyed by table, 1-based row index
KNOWN_DEVIATIONS = {2: frozenset({5, 7, 8, 12, 13, 23, 24})}
KNOWN_DEVIATION_TOLERANCE = 1e-4

STATUS_MATCH = "match"
STATUS_KNOWN_DEVIATION = "known_deviation"
STATUS_MISMATCH = "mismatch"
STATUS_ERROR = "error"

CSV_COLUMNS = [
    "table", "a", "b", "theta", "m1", "m2", "m3",
    "d1_ref", "d1_ours", "d1_absdiff", "d_ref", "d_ours", "d_absdiff", "certified",
    "reading", "d_alt_absdiff", "status",
]


class TableRow(BaseModel):
    """One printed test loop with its reference d₁ and d₂/d₃."""

    model_config = ConfigDict(frozen=True)

    table_id: int = Field(..., ge=1, le=4)
    index: int = Field(..., ge=1, description="1-based row number within its table")
    a: float = Field(..., gt=0)
    b: Optional[float] = Field(None, gt=0)
    theta_num: int = Field(..., description="θ = π · theta_num / theta_den")
    theta_den: int = Field(..., ge=1)
    m1: float = Field(..., gt=0)
    m2: float = Field(..., gt=0)
    m3: float = Field(..., gt=0)
    d1_ref: float
    d_ref: float

    @model_validator(mode="after")
    def _b_matches_table(self):
        if (self.b is not None) != (self.table_id in ELLIPTIC_TABLES):
            raise ValueError(f"Table {self.table_id} rows {'need' if self.table_id in ELLIPTIC_TABLES else 'take no'} b")
        if not (math.isfinite(self.d1_ref) and math.isfinite(self.d_ref)):
            raise ValueError("Reference values must be finite")
        return self

    @property
    def theta(self) -> float:
        return math.pi * self.theta_num / self.theta_den

    @property
    def theta_label(self) -> str:
        numerator = "pi" if self.theta_num == 1 else f"{self.theta_num}*pi"
        return numerator if self.theta_den == 1 else f"{numerator}/{self.theta_den}"

    @property
    def elliptic(self) -> bool:
        return self.table_id in ELLIPTIC_TABLES

    @property
    def known_deviation(self) -> bool:
        return self.index in KNOWN_DEVIATIONS.get(self.table_id, ())

    def masses(self):
        return masses_new(self.m1, self.m2, self.m3)

    def loop(self):
        if self.elliptic:
            return EllipticLoopParams(a=self.a, b=self.b, theta=self.theta)
        return CircularLoopParams(a=self.a, theta=self.theta)


class RowResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    row: TableRow
    d1_ours: float
    d_ours: Optional[float] = None
    reading: str = "corrected"
    d_alt: Optional[float] = None
    error: Optional[str] = None

    @computed_field
    @property
    def d1_absdiff(self) -> float:
        return abs(self.d1_ours - self.row.d1_ref)

    @computed_field
    @property
    def d_absdiff(self) -> Optional[float]:
        return None if self.d_ours is None else abs(self.d_ours - self.row.d_ref)

    @computed_field
    @property
    def d_alt_absdiff(self) -> Optional[float]:
        return None if self.d_alt is None else abs(self.d_alt - self.row.d_ref)

    @computed_field
    @property
    def certified(self) -> bool:
        return self.d_ours is not None and self.d_ours < self.d1_ours

    @property
    def within_tolerance(self) -> bool:
        return (
            self.error is None
            and self.d1_absdiff <= D1_TOLERANCE
            and self.d_absdiff is not None
            and self.d_absdiff <= D_TOLERANCE[self.row.table_id]
        )

    @computed_field
    @property
    def status(self) -> str:
        if self.error is not None or self.d_ours is None:
            return STATUS_ERROR
        if self.within_tolerance:
            return STATUS_MATCH
        if (
            self.row.known_deviation
            and self.d1_absdiff <= D1_TOLERANCE
            and self.d_absdiff <= KNOWN_DEVIATION_TOLERANCE
        ):
            return STATUS_KNOWN_DEVIATION
        return STATUS_MISMATCH

    @property
    def accepted(self) -> bool:
        """Within tolerance, or off only where the printed value is known to be."""
        return self.status in (STATUS_MATCH, STATUS_KNOWN_DEVIATION)

    def csv_row(self) -> list:
        row = self.row
        fmt = lambda v: "" if v is None else f"{v:.9f}"
        return [
            row.table_id, f"{row.a:.2f}", "" if row.b is None else f"{row.b:.2f}", row.theta_label,
            f"{row.m1:.2f}", f"{row.m2:.2f}", f"{row.m3:.2f}",
            f"{row.d1_ref:.6f}", fmt(self.d1_ours), f"{self.d1_absdiff:.3e}",
            f"{row.d_ref:.6f}", fmt(self.d_ours),
            "" if self.d_absdiff is None else f"{self.d_absdiff:.3e}",
            "true" if self.certified else "false",
            self.reading if self.error is None else f"error: {self.error}",
            "" if self.d_alt_absdiff is None else f"{self.d_alt_absdiff:.3e}",
            self.status,
        ]


# ============================================================================
# REFERENCE DATA
# ============================================================================

# (a, b, θ/π numerator, θ/π denominator, m1, m2, m3, d1, d2)
_TABLE_1 = [
    (0.13, 0.49, 1, 20, 0.29, 0.42, 0.29, 5.419669, 5.417862),
    (0.15, 0.49, 1, 20, 0.29, 0.41, 0.30, 5.417626, 5.416591),
    (0.15, 0.49, 1, 20, 0.29, 0.42, 0.29, 5.419669, 5.413794),
    (0.15, 0.49, 1, 20, 0.30, 0.35, 0.35, 5.441499, 5.436767),
    (0.15, 0.51, 1, 20, 0.30, 0.36, 0.34, 5.441669, 5.437985),
    (0.15, 0.51, 1, 20, 0.30, 0.37, 0.33, 5.442180, 5.433615),
    (0.15, 0.51, 1, 20, 0.30, 0.38, 0.32, 5.443031, 5.429587),
    (0.15, 0.51, 1, 20, 0.30, 0.39, 0.31, 5.444223, 5.425898),
    (0.15, 0.51, 1, 20, 0.30, 0.40, 0.30, 5.445755, 5.422550),
    (0.15, 0.53, 1, 20, 0.31, 0.35, 0.34, 5.470820, 5.467576),
    (0.15, 0.53, 1, 20, 0.31, 0.36, 0.33, 5.471160, 5.462971),
    (0.15, 0.53, 1, 20, 0.31, 0.37, 0.32, 5.471841, 5.458707),
    (0.15, 0.53, 1, 20, 0.31, 0.38, 0.31, 5.472863, 5.454784),
    (0.17, 0.45, 1, 20, 0.32, 0.32, 0.36, 5.500992, 5.488608),
    (0.17, 0.47, 1, 20, 0.32, 0.33, 0.35, 5.500481, 5.454518),
    (0.17, 0.47, 1, 20, 0.32, 0.34, 0.34, 5.500311, 5.449987),
    (0.17, 0.47, 1, 20, 0.33, 0.34, 0.33, 5.530142, 5.444254),
    (0.45, 0.15, 1, 1, 0.33, 0.31, 0.36, 5.471160, 5.456006),
    (0.45, 0.15, 1, 1, 0.33, 0.32, 0.35, 5.500481, 5.455325),
    (0.45, 0.15, 1, 1, 0.33, 0.33, 0.34, 5.530142, 5.454984),
    (0.47, 0.13, 1, 1, 0.34, 0.30, 0.36, 5.441669, 5.439671),
    (0.47, 0.13, 1, 1, 0.34, 0.31, 0.35, 5.470820, 5.438820),
    (0.47, 0.13, 1, 1, 0.34, 0.32, 0.34, 5.500311, 5.438309),
    (0.47, 0.15, 1, 1, 0.35, 0.30, 0.35, 5.441499, 5.417900),
    (0.49, 0.15, 1, 1, 0.36, 0.29, 0.35, 5.412519, 5.411552),
    (0.49, 0.15, 1, 1, 0.36, 0.32, 0.32, 5.500992, 5.410020),
    (0.49, 0.15, 1, 1, 0.37, 0.29, 0.34, 5.412859, 5.411962),
    (0.49, 0.15, 1, 1, 0.37, 0.30, 0.33, 5.442180, 5.411281),
    (0.49, 0.15, 1, 1, 0.37, 0.31, 0.32, 5.471841, 5.410940),
    (0.49, 0.15, 1, 1, 0.38, 0.29, 0.33, 5.413540, 5.412712),
    (0.49, 0.15, 1, 1, 0.38, 0.30, 0.32, 5.443031, 5.412201),
    (0.49, 0.15, 1, 1, 0.38, 0.31, 0.31, 5.472863, 5.412031),
    (0.49, 0.15, 1, 1, 0.39, 0.29, 0.32, 5.414562, 5.413803),
    (0.49, 0.15, 1, 1, 0.39, 0.30, 0.31, 5.444223, 5.413462),
    (0.49, 0.17, 1, 1, 0.40, 0.29, 0.31, 5.415924, 5.415807),
    (0.49, 0.17, 1, 1, 0.40, 0.30, 0.30, 5.445755, 5.415637),
    (0.49, 0.17, 1, 1, 0.41, 0.30, 0.29, 5.417626, 5.416078),
    (0.49, 0.17, 1, 1, 0.42, 0.29, 0.29, 5.419669, 5.416689),
]

_TABLE_2 = [
    (0.15, 0.67, 1, 30, 1.0, 1.0, 1.0, 11.523843, 11.505860),
    (0.15, 0.67, 1, 30, 1.0, 1.0, 1.0, 11.523843, 11.505860),
    (0.15, 0.69, 1, 30, 1.0, 1.0, 1.0, 11.523843, 11.444212),
    (0.17, 0.65, 1, 30, 1.0, 1.0, 1.0, 11.523843, 11.493238),
    (0.17, 0.67, 1, 20, 1.0, 1.0, 1.0, 11.523843, 11.452135),
    (0.17, 0.69, 1, 20, 1.0, 1.0, 1.0, 11.523843, 11.400124),
    (0.19, 0.63, 1, 30, 1.0, 1.0, 1.0, 11.523843, 11.519350),
    (0.19, 0.65, 1, 20, 1.0, 1.0, 1.0, 11.523843, 11.455969),
    (0.19, 0.67, 1, 20, 1.0, 1.0, 1.0, 11.523843, 11.386608),
    (0.19, 0.69, 1, 20, 1.0, 1.0, 1.0, 11.523843, 11.344747),
    (0.61, 0.23, 1, 1, 1.0, 1.0, 1.0, 11.523843, 11.516685),
    (0.63, 0.19, 1, 1, 1.0, 1.0, 1.0, 11.523843, 11.489791),
    (0.63, 0.21, 1, 1, 1.0, 1.0, 1.0, 11.523843, 11.436105),
    (0.65, 0.17, 1, 1, 1.0, 1.0, 1.0, 11.523843, 11.461786),
    (0.65, 0.19, 1, 1, 1.0, 1.0, 1.0, 11.523843, 11.392115),
    (0.65, 0.21, 1, 1, 1.0, 1.0, 1.0, 11.523843, 11.349366),
    (0.67, 0.15, 1, 1, 1.0, 1.0, 1.0, 11.523843, 11.472422),
    (0.67, 0.17, 1, 1, 1.0, 1.0, 1.0, 11.523843, 11.383978),
    (0.67, 0.19, 1, 1, 1.0, 1.0, 1.0, 11.523843, 11.324970),
    (0.67, 0.21, 1, 1, 1.0, 1.0, 1.0, 11.523843, 11.291915),
    (0.69, 0.13, 1, 1, 1.0, 1.0, 1.0, 11.523843, 11.522980),
    (0.69, 0.15, 1, 1, 1.0, 1.0, 1.0, 11.523843, 11.412094),
    (0.69, 0.17, 1, 1, 1.0, 1.0, 1.0, 11.523843, 11.334189),
    (0.69, 0.19, 1, 1, 1.0, 1.0, 1.0, 11.523843, 11.284714),
]

# (a, θ/π numerator, θ/π denominator, m1, m2, m3, d1, d3)
_TABLE_3 = [
    (0.17, 1, 2, 0.10, 0.75, 0.15, 5.062791, 5.060773),
    (0.17, 1, 2, 0.10, 0.77, 0.13, 5.083903, 5.071551),
    (0.17, 1, 2, 0.10, 0.78, 0.12, 5.094969, 5.077450),
    (0.17, 1, 2, 0.10, 0.80, 0.10, 5.118123, 5.090270),
    (0.17, 1, 2, 0.15, 0.53, 0.32, 5.051742, 5.050040),
    (0.17, 1, 2, 0.15, 0.57, 0.28, 5.068768, 5.046398),
    (0.17, 1, 2, 0.15, 0.60, 0.25, 5.085112, 5.047242),
    (0.17, 1, 2, 0.15, 0.65, 0.20, 5.119162, 5.055458),
    (0.17, 1, 2, 0.15, 0.70, 0.15, 5.161725, 5.072186),
    (0.17, 1, 2, 0.15, 0.72, 0.13, 5.121130, 5.081261),
    (0.17, 1, 2, 0.20, 0.31, 0.49, 5.176554, 5.175168),
    (0.17, 1, 2, 0.20, 0.35, 0.45, 5.167020, 5.144967),
    (0.17, 1, 2, 0.20, 0.40, 0.40, 5.162763, 5.114876),
    (0.17, 1, 2, 0.20, 0.50, 0.30, 5.179789, 5.080232),
    (0.17, 1, 2, 0.20, 0.55, 0.25, 5.201070, 5.075680),
    (0.17, 1, 2, 0.20, 0.60, 0.20, 5.230864, 5.079639),
    (0.19, 1, 2, 0.25, 0.22, 0.53, 5.249837, 5.237465),
    (0.19, 1, 2, 0.25, 0.25, 0.50, 5.325541, 5.202291),
    (0.19, 1, 2, 0.25, 0.30, 0.45, 5.308516, 5.150479),
    (0.19, 1, 2, 0.25, 0.35, 0.40, 5.300003, 5.107178),
    (0.19, 1, 2, 0.25, 0.62, 0.13, 5.041112, 5.020454),
    (0.19, 1, 2, 0.30, 0.22, 0.48, 5.230258, 5.222385),
    (0.19, 1, 2, 0.30, 0.25, 0.45, 5.308516, 5.189765),
    (0.19, 1, 2, 0.30, 0.30, 0.40, 5.445755, 5.142208),
    (0.19, 1, 2, 0.30, 0.35, 0.35, 5.441499, 5.103164),
    (0.19, 1, 2, 0.30, 0.56, 0.14, 5.036553, 5.032137),
    (0.21, 1, 2, 0.35, 0.21, 0.44, 5.192935, 5.184596),
    (0.21, 1, 2, 0.35, 0.29, 0.36, 5.412519, 5.092092),
    (0.21, 1, 2, 0.35, 0.39, 0.26, 5.327621, 5.007107),
    (0.21, 1, 2, 0.35, 0.48, 0.17, 5.091316, 4.959734),
    (0.21, 1, 2, 0.35, 0.53, 0.12, 4.971952, 4.945333),
    (0.21, 1, 3, 0.40, 0.28, 0.32, 5.386433, 5.342981),
    (0.21, 1, 3, 0.40, 0.32, 0.28, 5.386433, 5.287294),
    (0.21, 1, 3, 0.40, 0.36, 0.24, 5.271874, 5.237055),
    (0.21, 1, 3, 0.40, 0.38, 0.22, 5.216638, 5.213978),
    (0.23, 1, 2, 0.45, 0.19, 0.36, 5.139742, 5.127834),
    (0.23, 1, 2, 0.45, 0.29, 0.26, 5.337836, 5.003006),
    (0.23, 1, 2, 0.45, 0.37, 0.18, 5.112805, 4.927660),
    (0.23, 1, 2, 0.45, 0.46, 0.09, 4.885693, 4.868944),
    (0.23, 1, 2, 0.50, 0.18, 0.32, 5.123871, 5.108878),
    (0.23, 1, 2, 0.50, 0.23, 0.27, 5.266218, 5.044762),
    (0.23, 1, 2, 0.50, 0.29, 0.21, 5.208258, 4.979058),
    (0.23, 1, 2, 0.50, 0.37, 0.13, 4.990036, 4.910522),
    (0.23, 1, 2, 0.50, 0.41, 0.09, 4.889098, 4.884426),
]

_TABLE_4 = [
    (0.21, 1, 2, 1.0, 1.0, 1.0, 11.523843, 11.327950),
    (0.23, 1, 2, 1.0, 1.0, 1.0, 11.523843, 11.036769),
    (0.23, 1, 3, 1.0, 1.0, 1.0, 11.523843, 11.336568),
    (0.25, 1, 2, 1.0, 1.0, 1.0, 11.523843, 10.821272),
    (0.25, 1, 3, 1.0, 1.0, 1.0, 11.523843, 11.187475),
    (0.25, 1, 4, 1.0, 1.0, 1.0, 11.523843, 11.453195),
    (0.27, 1, 2, 1.0, 1.0, 1.0, 11.523843, 10.667031),
    (0.27, 1, 3, 1.0, 1.0, 1.0, 11.523843, 11.107374),
    (0.27, 1, 4, 1.0, 1.0, 1.0, 11.523843, 11.411685),
    (0.29, 1, 2, 1.0, 1.0, 1.0, 11.523843, 10.563849),
    (0.29, 1, 3, 1.0, 1.0, 1.0, 11.523843, 11.085761),
    (0.29, 1, 4, 1.0, 1.0, 1.0, 11.523843, 11.430090),
    (0.31, 1, 2, 1.0, 1.0, 1.0, 11.523843, 10.504424),
    (0.31, 1, 3, 1.0, 1.0, 1.0, 11.523843, 11.114860),
    (0.31, 1, 4, 1.0, 1.0, 1.0, 11.523843, 11.500414),
    (0.33, 1, 2, 1.0, 1.0, 1.0, 11.523843, 10.483477),
    (0.33, 1, 3, 1.0, 1.0, 1.0, 11.523843, 11.188786),
    (0.35, 1, 2, 1.0, 1.0, 1.0, 11.523843, 10.497161),
    (0.35, 1, 3, 1.0, 1.0, 1.0, 11.523843, 11.302997),
    (0.37, 1, 2, 1.0, 1.0, 1.0, 11.523843, 10.542652),
    (0.37, 1, 3, 1.0, 1.0, 1.0, 11.523843, 11.453926),
    (0.39, 1, 2, 1.0, 1.0, 1.0, 11.523843, 10.617860),
]


def _build_rows():
    rows = {}
    for table_id, data in ((1, _TABLE_1), (2, _TABLE_2)):
        rows[table_id] = tuple(
            TableRow(table_id=table_id, index=i, a=a, b=b, theta_num=num, theta_den=den,
                     m1=m1, m2=m2, m3=m3, d1_ref=d1, d_ref=d)
            for i, (a, b, num, den, m1, m2, m3, d1, d) in enumerate(data, 1)
        )
    for table_id, data in ((3, _TABLE_3), (4, _TABLE_4)):
        rows[table_id] = tuple(
            TableRow(table_id=table_id, index=i, a=a, theta_num=num, theta_den=den,
                     m1=m1, m2=m2, m3=m3, d1_ref=d1, d_ref=d)
            for i, (a, num, den, m1, m2, m3, d1, d) in enumerate(data, 1)
        )
    return rows


TABLES = _build_rows()


def table_rows(table_id) -> tuple:
    if table_id not in TABLES:
        raise ValueError(f"Unknown table {table_id}; expected one of {TABLE_IDS}")
    return TABLES[table_id]


def unique_rows(rows):
    """Rows with printed duplicates removed, first occurrence kept."""
    seen = set()
    unique = []
    for row in rows:
        key = row.model_dump(exclude={"index"})
        key = tuple(sorted(key.items()))
        if key not in seen:
            seen.add(key)
            unique.append(row)
    return unique


# ============================================================================
# RECOMPUTATION
# ============================================================================

def evaluate_row(row: TableRow, qs: QuadratureSettings = DEFAULT_QUADRATURE) -> RowResult:
    """
    Recompute d₁ and d₂/d₃ for one row. Table 1 rows are evaluated under both
    readings of the primary-3 constant term; the closer one is reported.
    Numerical failures are captured in ``error`` instead of raised.
    """
    masses = row.masses()
    cfg = lagrange_orbits(masses, TABLE_PERIOD)
    d1 = collision_lower_bound_d1(masses, TABLE_PERIOD).d1
    try:
        if not row.elliptic:
            return RowResult(row=row, d1_ours=d1, d_ours=action_d3(row.loop(), masses, cfg, qs))
        corrected = action_d2(row.loop(), masses, cfg, qs, reading="corrected")
        if row.table_id != 1:
            return RowResult(row=row, d1_ours=d1, d_ours=corrected)
        printed = action_d2(row.loop(), masses, cfg, qs, reading="printed")
        if abs(printed - row.d_ref) < abs(corrected - row.d_ref):
            return RowResult(row=row, d1_ours=d1, d_ours=printed, reading="printed", d_alt=corrected)
        return RowResult(row=row, d1_ours=d1, d_ours=corrected, reading="corrected", d_alt=printed)
    except RestrictedOrbitsError as e:
        logger.warning("❌ [tables] table %d row %d failed: %s", row.table_id, row.index, e)
        return RowResult(row=row, d1_ours=d1, error=f"{type(e).__name__}: {e}")


def typo_confirmed(results) -> bool:
    """True when the corrected reading reproduces every Table 1 row to 1e-5."""
    table1 = [r for r in results if r.row.table_id == 1]
    if not table1:
        return False
    for r in table1:
        if r.error is not None:
            return False
        corrected = r.d_ours if r.reading == "corrected" else r.d_alt
        if abs(corrected - r.row.d_ref) > TYPO_CONFIRMATION_TOLERANCE:
            return False
    return True
