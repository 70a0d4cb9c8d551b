"""Dataset and model-configuration loading and validation.

Datasets are flat CSV files, one row per region. Configuration is YAML; every
section is optional and falls back to the built-in defaults. See
``docs/schema.md`` for both formats.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import yaml

from refd.model import (
    DEFAULT_CATEGORIES,
    INF,
    CriteriaGroup,
    FactorDefinition,
    IntervalTable,
    PopulationCluster,
    RegionRecord,
    StddevMode,
    SupportRow,
    SupportTable,
    ValueKind,
    WeightScheme,
    check_categories,
)

REQUIRED_COLUMNS = ("region_id", "region_name", "population", "jan_temp_c", "density_pct")
OPTIONAL_COLUMNS = ("association",)

LARGE_CLUSTER_MIN = 2_000_000  # strictly more than this is large
SMALL_CLUSTER_MAX = 1_000_000  # strictly less than this is small


class ValidationError(ValueError):
    """Input failed validation. ``location`` names the file/row/column when known."""

    def __init__(self, message: str, location: str | None = None):
        self.message = message
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


# ---------------------------------------------------------------------------
# Population clusters
# ---------------------------------------------------------------------------


def cluster_population(population: int) -> PopulationCluster:
    if isinstance(population, bool) or not float(population).is_integer():
        raise ValidationError(f"population must be an integer, got {population!r}")
    if population <= 0:
        raise ValidationError(f"population must be positive, got {population}")
    if population > LARGE_CLUSTER_MIN:
        return PopulationCluster.LARGE
    if population >= SMALL_CLUSTER_MAX:
        return PopulationCluster.MEDIUM
    return PopulationCluster.SMALL


# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    year: int
    regions: tuple[RegionRecord, ...]
    factors: tuple[FactorDefinition, ...]
    provenance: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "factors", tuple(self.factors))
        if len(self.factors) < 1:
            raise ValidationError("dataset needs at least one factor")
        if len(self.regions) < 2:
            raise ValidationError("dataset needs at least two regions")
        fids = [f.id for f in self.factors]
        if len(set(fids)) != len(fids):
            raise ValidationError("duplicate factor id")
        seen: set[str] = set()
        for r in self.regions:
            if r.id in seen:
                raise ValidationError(f"duplicate region id {r.id!r}")
            seen.add(r.id)
            if set(r.factor_values) != set(fids):
                missing = sorted(set(fids) - set(r.factor_values))
                raise ValidationError(f"region {r.id!r} missing values for {missing}")

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    @property
    def n_factors(self) -> int:
        return len(self.factors)

    @property
    def factor_ids(self) -> list[str]:
        return [f.id for f in self.factors]

    def column(self, factor_id: str) -> list[float]:
        return [r.factor_values[factor_id] for r in self.regions]

    def matrix(self) -> list[list[float]]:
        ids = self.factor_ids
        return [[r.factor_values[f] for f in ids] for r in self.regions]

    def digest(self) -> str:
        return hashlib.sha256(serialize_dataset(self).encode("utf-8")).hexdigest()


def infer_group(factor_id: str) -> CriteriaGroup:
    for group in CriteriaGroup:
        if factor_id == group.value or factor_id.startswith(group.value + "_"):
            return group
    raise ValidationError(
        f"cannot infer criteria group for factor {factor_id!r}; "
        "prefix the column with a group name or declare it under `factors` in the config"
    )


def _parse_float(cell: str, where: str) -> float:
    text = cell.strip()
    if text == "":
        raise ValidationError("missing value", where)
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(f"non-numeric value {cell!r}", where) from None
    if not math.isfinite(value):
        raise ValidationError(f"non-finite value {cell!r}", where)
    return value


def _parse_population(cell: str, where: str) -> int:
    value = _parse_float(cell, where)
    if not value.is_integer():
        raise ValidationError(f"population must be an integer, got {cell!r}", where)
    if value <= 0:
        raise ValidationError(f"population must be positive, got {cell!r}", where)
    return int(value)


def _year_from_name(source: str) -> int:
    m = re.search(r"(?<!\d)((?:19|20)\d\d)(?!\d)", Path(source).name)
    return int(m.group(1)) if m else 0


def parse_dataset_text(
    text: str,
    schema: Sequence[FactorDefinition] | None = None,
    source: str = "<data>",
    year: int | None = None,
) -> Dataset:
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ValidationError("empty dataset file", source) from None

    for col in REQUIRED_COLUMNS:
        if col not in header:
            raise ValidationError(f"missing required column {col!r}", f"{source}:1")
    if len(set(header)) != len(header):
        dup = next(h for h in header if header.count(h) > 1)
        raise ValidationError(f"duplicate column {dup!r}", f"{source}:1")
    factor_cols = [h for h in header if h not in REQUIRED_COLUMNS and h not in OPTIONAL_COLUMNS]

    if schema is None:
        factors = [FactorDefinition(id=c, name=c, group=infer_group(c)) for c in factor_cols]
    else:
        factors = list(schema)
        declared = {f.id for f in factors}
        for f in factors:
            if f.id not in header:
                raise ValidationError(f"missing factor column {f.id!r}", f"{source}:1")
        extra = [c for c in factor_cols if c not in declared]
        if extra:
            raise ValidationError(f"column {extra[0]!r} is not a declared factor", f"{source}:1")
    if not factors:
        raise ValidationError("no factor columns", f"{source}:1")

    col = {h: i for i, h in enumerate(header)}
    regions = []
    seen: dict[str, int] = {}
    for line_no, row in enumerate(reader, start=2):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ValidationError(
                f"expected {len(header)} cells, found {len(row)}", f"{source}:{line_no}"
            )

        def where(name: str) -> str:
            return f"{source}:{line_no}:{name}"

        rid = row[col["region_id"]].strip()
        if not rid:
            raise ValidationError("missing value", where("region_id"))
        if rid in seen:
            raise ValidationError(
                f"duplicate region id {rid!r} (first seen on line {seen[rid]})", where("region_id")
            )
        seen[rid] = line_no
        values = {f.id: _parse_float(row[col[f.id]], where(f.id)) for f in factors}
        assoc = row[col["association"]].strip() if "association" in col else ""
        regions.append(
            RegionRecord(
                id=rid,
                name=row[col["region_name"]].strip() or rid,
                population=_parse_population(row[col["population"]], where("population")),
                january_mean_temp=_parse_float(row[col["jan_temp_c"]], where("jan_temp_c")),
                population_density=_parse_float(row[col["density_pct"]], where("density_pct")),
                factor_values=values,
                association=assoc or None,
            )
        )
    if len(regions) < 2:
        raise ValidationError(f"insufficient observations: {len(regions)} region(s), need 2", source)
    return Dataset(
        year=_year_from_name(source) if year is None else year,
        regions=tuple(regions),
        factors=tuple(factors),
        provenance={source: hashlib.sha256(text.encode("utf-8")).hexdigest()},
    )


def parse_dataset(
    path: str | Path,
    schema: Sequence[FactorDefinition] | None = None,
    year: int | None = None,
) -> Dataset:
    """Read and validate a dataset CSV. ``"-"`` reads standard input."""
    if str(path) == "-":
        return parse_dataset_text(sys.stdin.read(), schema, "<stdin>", year)
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"dataset file not found: {p}")
    return parse_dataset_text(p.read_text(encoding="utf-8"), schema, str(p), year)


def serialize_dataset(dataset: Dataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    with_assoc = any(r.association for r in dataset.regions)
    header = list(REQUIRED_COLUMNS) + (["association"] if with_assoc else []) + dataset.factor_ids
    writer.writerow(header)
    for r in dataset.regions:
        row = [r.id, r.name, str(r.population), repr(r.january_mean_temp), repr(r.population_density)]
        if with_assoc:
            row.append(r.association or "")
        row += [repr(float(r.factor_values[f])) for f in dataset.factor_ids]
        writer.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Model configuration
# ---------------------------------------------------------------------------

CONFIG_SECTIONS = ("intervals", "support", "weights", "categories", "screening", "options", "factors")


@dataclass(frozen=True)
class ModelConfig:
    intervals: IntervalTable = field(default_factory=IntervalTable.default)
    support: SupportTable = field(default_factory=SupportTable.default)
    weights: WeightScheme | None = None  # None means equal weights over the dataset's factors
    categories: tuple[tuple[int, float], ...] = DEFAULT_CATEGORIES
    stratify_kinds: frozenset[ValueKind] = frozenset({ValueKind.ABSOLUTE})
    per_capita: frozenset[str] = frozenset()
    stddev_mode: StddevMode = StddevMode.POPULATION
    symmetric_upper_bands: bool = False
    screening_threshold: float = 0.7
    whitelist: frozenset[str] = frozenset()
    priorities: Mapping[str, int] = field(default_factory=dict)
    factors: tuple[FactorDefinition, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "stddev_mode", StddevMode(self.stddev_mode))
        object.__setattr__(self, "stratify_kinds", frozenset(ValueKind(k) for k in self.stratify_kinds))
        check_categories(self.categories)
        if not 0 < self.screening_threshold <= 1:
            raise ValidationError("screening threshold must lie in (0, 1]", "screening")

    def weights_for(self, factor_ids: Sequence[str]) -> WeightScheme:
        if self.weights is None:
            return WeightScheme.equal(list(factor_ids))
        if set(self.weights.weights) != set(factor_ids):
            raise ValidationError("weights/points key mismatch", "weights")
        return self.weights

    def to_dict(self) -> dict[str, Any]:
        def row(r: SupportRow) -> dict[str, Any]:
            return {"lower": _num(r.lower), "upper": _num(r.upper), "points": r.points}

        return {
            "intervals": {"edges": list(self.intervals.edges)},
            "support": {
                "temperature": [row(r) for r in self.support.temperature],
                "density": [row(r) for r in self.support.density],
            },
            "weights": None if self.weights is None else dict(sorted(self.weights.weights.items())),
            "categories": {int(s): t for s, t in self.categories},
            "screening": {
                "threshold": self.screening_threshold,
                "whitelist": sorted(self.whitelist),
                "priorities": dict(sorted(self.priorities.items())),
            },
            "options": {
                "stddev": self.stddev_mode.value,
                "symmetric_upper_bands": self.symmetric_upper_bands,
                "stratify": sorted(k.value for k in self.stratify_kinds),
                "per_capita": sorted(self.per_capita),
            },
            "factors": None
            if self.factors is None
            else {
                f.id: {
                    "name": f.name,
                    "group": f.group.value,
                    "value_kind": f.value_kind.value,
                    "whitelisted": f.expert_whitelisted,
                    "priority": f.expert_priority,
                }
                for f in self.factors
            },
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _num(x: float) -> float | str:
    if x == INF:
        return "inf"
    if x == -INF:
        return "-inf"
    return x


def _as_float(value: Any, where: str) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "-inf"):
        return float(value.strip())
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"expected a number, got {value!r}", where)
    return float(value)


def _support_rows(rows: Any, section: str, closed_left: bool) -> tuple[SupportRow, ...]:
    if not isinstance(rows, list):
        raise ValidationError("expected a list of rows", section)
    out = []
    for i, raw in enumerate(rows):
        where = f"{section}[{i}]"
        if not isinstance(raw, dict) or "points" not in raw:
            raise ValidationError("row needs `points` and at least one of `lower`/`upper`", where)
        lower = _as_float(raw.get("lower", "-inf"), where)
        upper = _as_float(raw.get("upper", "inf"), where)
        out.append(
            SupportRow(
                lower=lower,
                upper=upper,
                points=_as_float(raw["points"], where),
                lower_closed=closed_left,
                upper_closed=not closed_left,
            )
        )
    for i, row in enumerate(out):
        if row.points < 0:
            raise ValidationError(f"negative points {row.points}", f"{section}[{i}]")
        if not row.lower < row.upper:
            raise ValidationError("lower bound must be below upper bound", f"{section}[{i}]")
        for j in range(i):
            if row.overlaps(out[j]):
                raise ValidationError(f"overlapping support rows {j} and {i}", f"{section}[{i}]")
    return tuple(out)


def config_from_dict(raw: Mapping[str, Any] | None) -> ModelConfig:
    raw = dict(raw or {})
    # Accept the dotted spellings "support.temperature" / "support.density".
    for key in ("temperature", "density"):
        dotted = f"support.{key}"
        if dotted in raw:
            raw.setdefault("support", {})
            raw["support"] = dict(raw["support"] or {}, **{key: raw.pop(dotted)})
    unknown = sorted(set(raw) - set(CONFIG_SECTIONS))
    if unknown:
        raise ValidationError(f"unknown config section {unknown[0]!r}")

    options = dict(raw.get("options") or {})
    symmetric = bool(options.get("symmetric_upper_bands", False))

    kwargs: dict[str, Any] = {"symmetric_upper_bands": symmetric}
    intervals = raw.get("intervals")
    if intervals:
        edges = intervals.get("edges") if isinstance(intervals, dict) else intervals
        try:
            kwargs["intervals"] = IntervalTable.from_edges([_as_float(e, "intervals") for e in edges])
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"interval table does not partition the real line: {exc}", "intervals") from None
    else:
        kwargs["intervals"] = IntervalTable.default(symmetric)

    support = raw.get("support") or {}
    default_support = SupportTable.default()
    kwargs["support"] = SupportTable(
        temperature=_support_rows(support["temperature"], "support.temperature", closed_left=False)
        if "temperature" in support
        else default_support.temperature,
        density=_support_rows(support["density"], "support.density", closed_left=True)
        if "density" in support
        else default_support.density,
    )

    if raw.get("weights"):
        w = raw["weights"]
        if not isinstance(w, dict):
            raise ValidationError("expected a mapping factor-id -> weight", "weights")
        parsed = {str(k): _as_float(v, f"weights.{k}") for k, v in w.items()}
        for k, v in parsed.items():
            if not v > 0:
                raise ValidationError(f"weight must be positive, got {v}", f"weights.{k}")
        kwargs["weights"] = WeightScheme(parsed)

    if raw.get("categories"):
        cats = raw["categories"]
        try:
            pairs = sorted(((int(k), _as_float(v, f"categories.{k}")) for k, v in cats.items()), reverse=True)
        except (AttributeError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad categories section: {exc}", "categories") from None
        try:
            check_categories(pairs)
        except ValueError as exc:
            raise ValidationError(str(exc), "categories") from None
        kwargs["categories"] = tuple(pairs)

    screening = dict(raw.get("screening") or {})
    if "threshold" in screening:
        kwargs["screening_threshold"] = _as_float(screening["threshold"], "screening.threshold")
    kwargs["whitelist"] = frozenset(str(x) for x in screening.get("whitelist") or ())
    kwargs["priorities"] = {str(k): int(v) for k, v in (screening.get("priorities") or {}).items()}

    if "stddev" in options:
        try:
            kwargs["stddev_mode"] = StddevMode(options["stddev"])
        except ValueError:
            raise ValidationError(f"unknown stddev mode {options['stddev']!r}", "options.stddev") from None
    if "stratify" in options:
        try:
            kwargs["stratify_kinds"] = frozenset(ValueKind(k) for k in options["stratify"] or ())
        except ValueError as exc:
            raise ValidationError(str(exc), "options.stratify") from None
    kwargs["per_capita"] = frozenset(str(x) for x in options.get("per_capita") or ())
    unknown_opts = sorted(set(options) - {"stddev", "stratify", "per_capita", "symmetric_upper_bands"})
    if unknown_opts:
        raise ValidationError(f"unknown option {unknown_opts[0]!r}", "options")

    if raw.get("factors"):
        defs = []
        for fid, spec in raw["factors"].items():
            spec = dict(spec or {})
            where = f"factors.{fid}"
            try:
                group = spec.get("group") or infer_group(str(fid)).value
                defs.append(
                    FactorDefinition(
                        id=str(fid),
                        name=str(spec.get("name", fid)),
                        group=CriteriaGroup(group),
                        value_kind=ValueKind(spec.get("value_kind", "relative")),
                        expert_whitelisted=bool(spec.get("whitelisted", False)) or str(fid) in kwargs["whitelist"],
                        expert_priority=int(spec.get("priority", kwargs["priorities"].get(str(fid), 0))),
                    )
                )
            except ValidationError as exc:
                raise ValidationError(exc.message, where) from None
            except ValueError as exc:
                raise ValidationError(str(exc), where) from None
        kwargs["factors"] = tuple(defs)
        kwargs["whitelist"] = kwargs["whitelist"] | {f.id for f in defs if f.expert_whitelisted}
        kwargs["priorities"] = {**{f.id: f.expert_priority for f in defs}, **kwargs["priorities"]}

    return ModelConfig(**kwargs)


def load_config(path: str | Path | None) -> ModelConfig:
    """Load a YAML config. ``None`` or ``"default"`` gives the built-in defaults."""
    if path is None or str(path) == "default":
        return ModelConfig()
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"config file not found: {p}")
    try:
        raw = yaml.safe_load(p.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ValidationError(f"malformed config: {exc}", str(p)) from None
    if raw is not None and not isinstance(raw, dict):
        raise ValidationError("config must be a mapping of sections", str(p))
    try:
        return config_from_dict(raw)
    except ValidationError as exc:
        raise ValidationError(exc.message, f"{p}:{exc.location}" if exc.location else str(p)) from None


def dump_config(config: ModelConfig) -> str:
    data = {k: v for k, v in config.to_dict().items() if v is not None}
    return yaml.safe_dump(data, sort_keys=False)


def load_dataset_for(path: str | Path, config: ModelConfig, year: int | None = None) -> Dataset:
    return parse_dataset(path, config.factors, year)


def regions_by_cluster(regions: Iterable[RegionRecord]) -> dict[PopulationCluster, list[RegionRecord]]:
    out: dict[PopulationCluster, list[RegionRecord]] = {}
    for r in regions:
        out.setdefault(cluster_population(r.population), []).append(r)
    return out
