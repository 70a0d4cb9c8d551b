"""Domain types and the pure scoring mathematics.

Everything here is a pure function over frozen dataclasses. Scores are
plain floats (double precision); rounding only ever happens at report time.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class CriteriaGroup(str, enum.Enum):
    RESERVE_TRAINING = "reserve_training"
    ELITE_SPORT = "elite_sport"
    INFRASTRUCTURE = "infrastructure"
    GRASSROOTS = "grassroots"
    DEVELOPMENT_PROMOTION = "development_promotion"


class ValueKind(str, enum.Enum):
    ABSOLUTE = "absolute"
    RELATIVE = "relative"
    DYNAMIC = "dynamic"


class PopulationCluster(str, enum.Enum):
    SMALL = "small"  # < 1 000 000
    MEDIUM = "medium"  # 1 000 000 .. 2 000 000 inclusive
    LARGE = "large"  # > 2 000 000

    @property
    def order(self) -> int:
        return ("small", "medium", "large").index(self.value)


class StddevMode(str, enum.Enum):
    POPULATION = "population"
    SAMPLE = "sample"


@dataclass(frozen=True)
class FactorDefinition:
    id: str
    name: str
    group: CriteriaGroup
    value_kind: ValueKind = ValueKind.RELATIVE
    expert_whitelisted: bool = False
    expert_priority: int = 0

    def __post_init__(self):
        if not self.id:
            raise ValueError("factor id must be non-empty")
        object.__setattr__(self, "group", CriteriaGroup(self.group))
        object.__setattr__(self, "value_kind", ValueKind(self.value_kind))


@dataclass(frozen=True)
class RegionRecord:
    id: str
    name: str
    population: int
    january_mean_temp: float
    population_density: float
    factor_values: Mapping[str, float] = field(default_factory=dict)
    association: str | None = None

    def __post_init__(self):
        if self.population <= 0:
            raise ValueError(f"region {self.id!r}: population must be positive")


@dataclass(frozen=True)
class FactorStats:
    mean: float
    sigma: float
    n: int
    stratum: str = "all"


# ---------------------------------------------------------------------------
# Point allocation bands
# ---------------------------------------------------------------------------

INF = math.inf

# Band i covers mean + lower*sigma < A <= mean + upper*sigma and scores i points.
DEFAULT_BAND_EDGES: tuple[float, ...] = (-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.3, 1.7, 2.0)
SYMMETRIC_BAND_EDGES: tuple[float, ...] = (-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 1.75, 2.0)

DEGENERATE_POINTS = 5


@dataclass(frozen=True)
class Band:
    lower: float  # exclusive, in sigma units; may be -inf
    upper: float  # inclusive, in sigma units; may be +inf
    points: int


@dataclass(frozen=True)
class IntervalTable:
    bands: tuple[Band, ...]

    def __post_init__(self):
        bands = tuple(self.bands)
        object.__setattr__(self, "bands", bands)
        if len(bands) != 11:
            raise ValueError(f"interval table needs 11 bands, got {len(bands)}")
        if bands[0].lower != -INF or bands[-1].upper != INF:
            raise ValueError("interval table must extend to -inf and +inf")
        for i, band in enumerate(bands):
            if band.points != i:
                raise ValueError(f"band {i}: points must be {i}, got {band.points}")
            if not band.lower < band.upper:
                raise ValueError(f"band {i}: empty interval ({band.lower}, {band.upper}]")
            if i and bands[i - 1].upper != band.lower:
                raise ValueError(f"band {i}: not contiguous with band {i - 1}")

    @classmethod
    def from_edges(cls, edges: Sequence[float]) -> "IntervalTable":
        edges = [float(e) for e in edges]
        if len(edges) != 10:
            raise ValueError(f"interval table needs 10 inner edges, got {len(edges)}")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("interval edges must be strictly increasing")
        bounds = [-INF, *edges, INF]
        return cls(tuple(Band(bounds[i], bounds[i + 1], i) for i in range(11)))

    @classmethod
    def default(cls, symmetric_upper_bands: bool = False) -> "IntervalTable":
        return cls.from_edges(SYMMETRIC_BAND_EDGES if symmetric_upper_bands else DEFAULT_BAND_EDGES)

    @property
    def edges(self) -> tuple[float, ...]:
        return tuple(b.upper for b in self.bands[:-1])


# ---------------------------------------------------------------------------
# Support table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SupportRow:
    lower: float
    upper: float
    points: float
    lower_closed: bool
    upper_closed: bool

    def __post_init__(self):
        for name in ("lower", "upper", "points"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def contains(self, x: float) -> bool:
        above = x >= self.lower if self.lower_closed else x > self.lower
        below = x <= self.upper if self.upper_closed else x < self.upper
        return above and below

    def overlaps(self, other: "SupportRow") -> bool:
        lo = max(self.lower, other.lower)
        hi = min(self.upper, other.upper)
        if lo < hi:
            return True
        if lo == hi and math.isfinite(lo):
            return self.contains(lo) and other.contains(lo)
        return False


def temperature_row(lower: float, upper: float, points: float) -> SupportRow:
    """Temperature rows are left-open, right-closed: ``lower < T <= upper``."""
    return SupportRow(lower, upper, points, lower_closed=False, upper_closed=True)


def density_row(lower: float, upper: float, points: float) -> SupportRow:
    """Density rows are left-closed, right-open: ``lower <= D < upper``."""
    return SupportRow(lower, upper, points, lower_closed=True, upper_closed=False)


def _check_rows(rows: Sequence[SupportRow], label: str) -> None:
    for i, row in enumerate(rows):
        if row.points < 0:
            raise ValueError(f"{label} row {i}: negative points {row.points}")
        if not row.lower <= row.upper:
            raise ValueError(f"{label} row {i}: lower bound above upper bound")
        for j in range(i):
            if row.overlaps(rows[j]):
                raise ValueError(f"overlapping support rows: {label} rows {j} and {i}")


@dataclass(frozen=True)
class SupportTable:
    temperature: tuple[SupportRow, ...]
    density: tuple[SupportRow, ...]

    def __post_init__(self):
        object.__setattr__(self, "temperature", tuple(self.temperature))
        object.__setattr__(self, "density", tuple(self.density))
        _check_rows(self.temperature, "support.temperature")
        _check_rows(self.density, "support.density")

    @classmethod
    def default(cls) -> "SupportTable":
        # Two rows only; full national tables are user-supplied.
        return cls(
            temperature=(temperature_row(-15, -10, 0.2), temperature_row(-20, -15, 0.3)),
            density=(density_row(75, INF, 0.2), density_row(50, 75, 0.3)),
        )


# ---------------------------------------------------------------------------
# Weights and categories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightScheme:
    weights: Mapping[str, float]

    def __post_init__(self):
        weights = dict(self.weights)
        for key, w in weights.items():
            if not (math.isfinite(w) and w > 0):
                raise ValueError(f"weight for {key!r} must be positive, got {w}")
        object.__setattr__(self, "weights", weights)

    @classmethod
    def equal(cls, factor_ids: Sequence[str]) -> "WeightScheme":
        if not factor_ids:
            raise ValueError("equal weighting needs at least one factor")
        return cls({fid: 1.0 / len(factor_ids) for fid in factor_ids})

    @property
    def total(self) -> float:
        return math.fsum(self.weights.values())

    @property
    def max_contingent(self) -> float:
        """Largest reachable contingent score (every factor at 10 points)."""
        return 10.0 * self.total


DEFAULT_CATEGORIES: tuple[tuple[int, float], ...] = ((5, 8.0), (4, 6.5), (3, 4.5), (2, 2.5))


def check_categories(thresholds: Sequence[tuple[int, float]]) -> None:
    stars = [s for s, _ in thresholds]
    if stars != list(range(5, 1, -1)):
        raise ValueError(f"categories must define thresholds for 5, 4, 3, 2 stars, got {stars}")
    for (s_hi, t_hi), (s_lo, t_lo) in zip(thresholds, thresholds[1:]):
        if not t_hi > t_lo:
            raise ValueError(
                f"thresholds not decreasing: {s_hi} stars at {t_hi} vs {s_lo} stars at {t_lo}"
            )


@dataclass(frozen=True)
class RatingResult:
    region_id: str
    points: Mapping[str, int]
    contingent_score: float
    density_support: float
    temp_support: float
    overall_score: float
    stars: int
    rank: int


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def compute_factor_stats(
    values: Sequence[float],
    stddev_mode: StddevMode | str = StddevMode.POPULATION,
    stratum: str = "all",
) -> FactorStats:
    mode = StddevMode(stddev_mode)
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("no observations")
    if not np.all(np.isfinite(arr)):
        raise ValueError("invalid observation")
    if np.all(arr == arr[0]):
        return FactorStats(float(arr[0]), 0.0, int(arr.size), stratum)
    ddof = 1 if mode is StddevMode.SAMPLE else 0
    if arr.size <= ddof:
        raise ValueError("sample standard deviation needs at least 2 observations")
    return FactorStats(float(arr.mean()), float(arr.std(ddof=ddof)), int(arr.size), stratum)


def allocate_points(value: float, stats: FactorStats, table: IntervalTable | None = None) -> int:
    """Points for ``value`` given the factor's mean and sigma.

    Bands are compared in value space, ``mean + lower*sigma < A <= mean + upper*sigma``,
    so a value sitting exactly on a printed boundary lands where the table puts it.
    A zero sigma yields ``DEGENERATE_POINTS`` for every value.
    """
    if table is None:
        table = IntervalTable.default()
    if stats.sigma < 0:
        raise ValueError("sigma must be non-negative")
    if not math.isfinite(value):
        raise ValueError("invalid observation")
    if stats.sigma == 0:
        return DEGENERATE_POINTS
    for band in table.bands:
        if value <= stats.mean + band.upper * stats.sigma:
            return band.points
    return table.bands[-1].points


def allocate_points_array(values: np.ndarray, stats: FactorStats, table: IntervalTable) -> np.ndarray:
    """Vectorised ``allocate_points`` for a whole column."""
    values = np.asarray(values, dtype=float)
    if stats.sigma == 0:
        return np.full(values.shape, DEGENERATE_POINTS, dtype=int)
    thresholds = np.array([stats.mean + e * stats.sigma for e in table.edges])
    # number of thresholds strictly below the value == band index
    return np.searchsorted(thresholds, values, side="left").astype(int)


def contingent_score(points: Mapping[str, int], weights: WeightScheme | Mapping[str, float]) -> float:
    w = weights.weights if isinstance(weights, WeightScheme) else weights
    if set(points) != set(w):
        raise ValueError("weights/points key mismatch")
    keys = sorted(points)
    return weighted_sum([points[k] for k in keys], [w[k] for k in keys])


def weighted_sum(points: Sequence[int], weights: Sequence[float]) -> float:
    """Sum of points x weights, totalling the integer points per distinct weight first.

    Regions whose points agree in total under a shared weight then get bit-identical
    scores, so ties reach the tie-break rule instead of being settled by rounding.
    """
    totals: dict[float, int] = {}
    for p, w in zip(points, weights):
        totals[float(w)] = totals.get(float(w), 0) + int(p)
    return math.fsum(w * t for w, t in totals.items())


def support_scores(temp: float, density: float, table: SupportTable | None = None) -> tuple[float, float]:
    """Return ``(temp_support, density_support)``; unmatched components score 0."""
    if table is None:
        table = SupportTable.default()
    if not (math.isfinite(temp) and math.isfinite(density)):
        raise ValueError("support inputs must be finite")
    t = next((r.points for r in table.temperature if r.contains(temp)), 0.0)
    d = next((r.points for r in table.density if r.contains(density)), 0.0)
    return float(t), float(d)


def overall_score(contingent: float, density_support: float, temp_support: float) -> float:
    return contingent + density_support + temp_support


def categorize(overall: float, thresholds: Sequence[tuple[int, float]] = DEFAULT_CATEGORIES) -> int:
    for stars, minimum in thresholds:
        if overall >= minimum:
            return stars
    return 1


def star_string(stars: int) -> str:
    return "*" * stars
