"""Full rating runs, group subscores, year-on-year trends and weight sensitivity."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from refd.ingest import Dataset, ModelConfig, ValidationError, cluster_population
from refd.model import (
    CriteriaGroup,
    FactorStats,
    PopulationCluster,
    RatingResult,
    allocate_points_array,
    categorize,
    compute_factor_stats,
    contingent_score,
    overall_score,
    support_scores,
    weighted_sum,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RatingTable:
    year: int
    results: tuple[RatingResult, ...]
    stats: Mapping[str, tuple[FactorStats, ...]]
    policies: Mapping[str, str]  # factor id -> "all" | "cluster" | "per_capita"
    config_digest: str
    max_contingent: float
    stddev_mode: str
    warnings: tuple[str, ...] = ()

    def by_region(self) -> dict[str, RatingResult]:
        return {r.region_id: r for r in self.results}

    def to_dict(self) -> dict:
        return {
            "year": self.year,
            "config_digest": self.config_digest,
            "stddev_mode": self.stddev_mode,
            "max_contingent": self.max_contingent,
            "results": [
                {
                    "rank": r.rank,
                    "region_id": r.region_id,
                    "points": dict(r.points),
                    "contingent_score": r.contingent_score,
                    "density_support": r.density_support,
                    "temp_support": r.temp_support,
                    "overall_score": r.overall_score,
                    "stars": r.stars,
                }
                for r in self.results
            ],
            "factor_stats": {
                fid: [{"stratum": s.stratum, "mean": s.mean, "sigma": s.sigma, "n": s.n} for s in stats]
                for fid, stats in self.stats.items()
            },
            "policies": dict(self.policies),
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class _Scored:
    points: np.ndarray  # regions x factors, int
    temp_support: np.ndarray
    density_support: np.ndarray
    stats: dict[str, tuple[FactorStats, ...]]
    policies: dict[str, str]
    warnings: list[str]


def _score_points(dataset: Dataset, config: ModelConfig) -> _Scored:
    regions = dataset.regions
    n = len(regions)
    points = np.zeros((n, dataset.n_factors), dtype=int)
    stats: dict[str, tuple[FactorStats, ...]] = {}
    policies: dict[str, str] = {}
    warnings: list[str] = []

    clusters = [cluster_population(r.population) for r in regions]
    populations = np.array([r.population for r in regions], dtype=float)

    for k, factor in enumerate(dataset.factors):
        values = np.array(dataset.column(factor.id), dtype=float)
        if factor.id in config.per_capita:
            policy = "per_capita"
            strata = {"all": np.arange(n)}
            values = values / populations
        elif factor.value_kind in config.stratify_kinds:
            policy = "cluster"
            strata = {}
            for c in PopulationCluster:
                idx = np.array([i for i in range(n) if clusters[i] is c], dtype=int)
                if idx.size == 0:
                    continue
                if idx.size < 2:
                    raise ValidationError(
                        f"population cluster {c.value!r} has {idx.size} region(s); "
                        f"stratified factor {factor.id!r} needs at least 2"
                    )
                strata[c.value] = idx
        else:
            policy = "all"
            strata = {"all": np.arange(n)}
        policies[factor.id] = policy

        factor_stats = []
        for label, idx in strata.items():
            s = compute_factor_stats(values[idx], config.stddev_mode, stratum=label)
            factor_stats.append(s)
            if s.sigma == 0:
                warnings.append(
                    f"factor {factor.id!r} (stratum {label}): sigma = 0, every region scored as at par"
                )
            points[idx, k] = allocate_points_array(values[idx], s, config.intervals)
        stats[factor.id] = tuple(factor_stats)

    temp = np.zeros(n)
    dens = np.zeros(n)
    for i, r in enumerate(regions):
        temp[i], dens[i] = support_scores(r.january_mean_temp, r.population_density, config.support)
    for label, rows, attr in (
        ("temperature", config.support.temperature, "january_mean_temp"),
        ("density", config.support.density, "population_density"),
    ):
        unmatched = [r.id for r in regions if not any(row.contains(getattr(r, attr)) for row in rows)]
        if unmatched:
            warnings.append(
                f"{len(unmatched)} region(s) matched no {label} support row: {', '.join(unmatched)}"
            )
    return _Scored(points, temp, dens, stats, policies, warnings)


def _order(overall: Sequence[float], contingent: Sequence[float], ids: Sequence[str]) -> list[int]:
    """Indices sorted best first: overall desc, contingent desc, region id asc."""
    return sorted(range(len(ids)), key=lambda i: (-overall[i], -contingent[i], ids[i]))


def run_rating(dataset: Dataset, config: ModelConfig) -> RatingTable:
    fids = dataset.factor_ids
    weights = config.weights_for(fids)
    scored = _score_points(dataset, config)

    rows = []
    for i, region in enumerate(dataset.regions):
        pts = {fid: int(scored.points[i, k]) for k, fid in enumerate(fids)}
        r = contingent_score(pts, weights)
        t, d = float(scored.temp_support[i]), float(scored.density_support[i])
        total = overall_score(r, d, t)
        rows.append((region.id, pts, r, d, t, total))

    order = _order([x[5] for x in rows], [x[2] for x in rows], [x[0] for x in rows])
    results = []
    for rank, i in enumerate(order, start=1):
        rid, pts, r, d, t, total = rows[i]
        results.append(
            RatingResult(
                region_id=rid,
                points=pts,
                contingent_score=r,
                density_support=d,
                temp_support=t,
                overall_score=total,
                stars=categorize(total, config.categories),
                rank=rank,
            )
        )
    for w in scored.warnings:
        logger.warning(w)
    return RatingTable(
        year=dataset.year,
        results=tuple(results),
        stats=scored.stats,
        policies=scored.policies,
        config_digest=config.digest(),
        max_contingent=weights.max_contingent,
        stddev_mode=config.stddev_mode.value,
        warnings=tuple(scored.warnings),
    )


# ---------------------------------------------------------------------------
# Group subscores
# ---------------------------------------------------------------------------


def group_subscores(table: RatingTable, dataset: Dataset) -> dict[str, dict[str, float | None]]:
    """Unweighted mean points per criteria group; ``None`` for a group with no factors."""
    members = {g: [f.id for f in dataset.factors if f.group is g] for g in CriteriaGroup}
    out = {}
    for res in table.results:
        out[res.region_id] = {
            g.value: (sum(res.points[f] for f in fids) / len(fids) if fids else None)
            for g, fids in members.items()
        }
    return out


# ---------------------------------------------------------------------------
# Trends
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrendEntry:
    region_id: str
    years: tuple[int, ...]
    scores: tuple[float | None, ...]
    ranks: tuple[int | None, ...]
    stars: tuple[int | None, ...]
    score_deltas: tuple[float | None, ...]  # between consecutive tables
    rank_deltas: tuple[int | None, ...]  # positive = moved up
    star_transitions: tuple[str | None, ...]
    status: str  # "present" | "exited" | "entered" | "intermittent"


@dataclass(frozen=True)
class TrendReport:
    years: tuple[int, ...]
    entries: tuple[TrendEntry, ...]

    def to_dict(self) -> dict:
        return {
            "years": list(self.years),
            "regions": [
                {
                    "region_id": e.region_id,
                    "scores": list(e.scores),
                    "ranks": list(e.ranks),
                    "stars": list(e.stars),
                    "score_deltas": list(e.score_deltas),
                    "rank_deltas": list(e.rank_deltas),
                    "star_transitions": list(e.star_transitions),
                    "status": e.status,
                }
                for e in self.entries
            ],
        }


def compare_years(tables: Sequence[RatingTable]) -> TrendReport:
    if len(tables) < 2:
        raise ValueError("trend analysis needs at least 2 rating tables")
    lookups = [t.by_region() for t in tables]
    common = set(lookups[0]).intersection(*lookups[1:])
    if not common:
        raise ValueError("no overlapping regions across the rating tables")

    ids = sorted(set().union(*lookups))
    entries = []
    for rid in ids:
        res = [lk.get(rid) for lk in lookups]
        present = [r is not None for r in res]
        score_d, rank_d, star_t = [], [], []
        for prev, cur in zip(res, res[1:]):
            if prev is None or cur is None:
                score_d.append(None)
                rank_d.append(None)
                star_t.append(None)
            else:
                score_d.append(cur.overall_score - prev.overall_score)
                rank_d.append(prev.rank - cur.rank)
                star_t.append(f"{prev.stars}->{cur.stars}")
        if all(present):
            status = "present"
        elif present == sorted(present, reverse=True):
            status = "exited"
        elif present == sorted(present):
            status = "entered"
        else:
            status = "intermittent"
        entries.append(
            TrendEntry(
                region_id=rid,
                years=tuple(t.year for t in tables),
                scores=tuple(r.overall_score if r else None for r in res),
                ranks=tuple(r.rank if r else None for r in res),
                stars=tuple(r.stars if r else None for r in res),
                score_deltas=tuple(score_d),
                rank_deltas=tuple(rank_d),
                star_transitions=tuple(star_t),
                status=status,
            )
        )
    return TrendReport(tuple(t.year for t in tables), tuple(entries))


# ---------------------------------------------------------------------------
# Weight sensitivity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StabilityReport:
    epsilon: float
    trials: int
    seed: int
    region_ids: tuple[str, ...]
    baseline_ranks: tuple[int, ...]
    min_ranks: tuple[int, ...]
    max_ranks: tuple[int, ...]
    spearman: tuple[float, ...]

    @property
    def rank_ranges(self) -> dict[str, int]:
        return {r: hi - lo for r, lo, hi in zip(self.region_ids, self.min_ranks, self.max_ranks)}

    def to_dict(self) -> dict:
        rho = np.array(self.spearman)
        return {
            "epsilon": self.epsilon,
            "trials": self.trials,
            "seed": self.seed,
            "spearman": {
                "mean": float(rho.mean()),
                "min": float(rho.min()),
                "max": float(rho.max()),
                "per_trial": [float(x) for x in rho],
            },
            "regions": [
                {
                    "region_id": rid,
                    "baseline_rank": b,
                    "min_rank": lo,
                    "max_rank": hi,
                    "range": hi - lo,
                }
                for rid, b, lo, hi in zip(self.region_ids, self.baseline_ranks, self.min_ranks, self.max_ranks)
            ],
        }


def _ranks(overall: np.ndarray, contingent: np.ndarray, ids: Sequence[str]) -> np.ndarray:
    order = _order(list(overall), list(contingent), ids)
    ranks = np.empty(len(ids), dtype=int)
    ranks[order] = np.arange(1, len(ids) + 1)
    return ranks


def spearman_from_ranks(a: np.ndarray, b: np.ndarray) -> float:
    """Spearman rho for two tie-free rankings of the same items."""
    n = len(a)
    if n < 2:
        return 1.0
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(1.0 - 6.0 * np.sum(d * d) / (n * (n * n - 1)))


def sensitivity(
    dataset: Dataset,
    config: ModelConfig,
    epsilon: float,
    trials: int,
    seed: int,
) -> StabilityReport:
    """Rank stability under multiplicative uniform weight jitter.

    Each trial multiplies every weight by an independent draw from
    ``[1 - epsilon, 1 + epsilon]`` and rescales so the weights keep their
    baseline total (1 for equal weights).
    """
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    fids = dataset.factor_ids
    base_w = np.array([config.weights_for(fids).weights[f] for f in fids])
    total_w = math.fsum(base_w)
    scored = _score_points(dataset, config)
    pts = scored.points
    support = scored.density_support + scored.temp_support
    ids = [r.id for r in dataset.regions]

    def contingent(w: np.ndarray) -> np.ndarray:
        # same summation as run_rating, so the epsilon = 0 baseline is bit-identical
        return np.array([weighted_sum(row, w) for row in pts])

    base_contingent = contingent(base_w)
    baseline = _ranks(base_contingent + support, base_contingent, ids)

    rng = np.random.default_rng(seed)
    lo = baseline.copy()
    hi = baseline.copy()
    rhos = []
    for _ in range(trials):
        jitter = rng.uniform(1 - epsilon, 1 + epsilon, size=base_w.size)
        if epsilon == 0:
            w = base_w
        else:
            w = base_w * jitter
            w = w * (total_w / w.sum())
        c = contingent(w)
        ranks = _ranks(c + support, c, ids)
        lo = np.minimum(lo, ranks)
        hi = np.maximum(hi, ranks)
        rhos.append(spearman_from_ranks(baseline, ranks))
    return StabilityReport(
        epsilon=epsilon,
        trials=trials,
        seed=seed,
        region_ids=tuple(ids),
        baseline_ranks=tuple(int(x) for x in baseline),
        min_ranks=tuple(int(x) for x in lo),
        max_ranks=tuple(int(x) for x in hi),
        spearman=tuple(rhos),
    )
