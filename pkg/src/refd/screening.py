"""Pairwise Pearson screening and greedy multicollinearity pruning."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CorrelationMatrix:
    factor_ids: tuple[str, ...]
    r: np.ndarray  # NaN where undefined
    defined: np.ndarray  # bool

    def index(self, factor_id: str) -> int:
        return self.factor_ids.index(factor_id)

    def value(self, a: str, b: str) -> float | None:
        i, j = self.index(a), self.index(b)
        return float(self.r[i, j]) if self.defined[i, j] else None

    @property
    def constant_factors(self) -> tuple[str, ...]:
        return tuple(f for k, f in enumerate(self.factor_ids) if not self.defined[k, k])


@dataclass(frozen=True)
class FlaggedPair:
    a: str
    b: str
    r: float


@dataclass(frozen=True)
class Elimination:
    factor_id: str
    degree: int
    pairs: tuple[FlaggedPair, ...]
    reason: str


@dataclass
class ScreeningReport:
    threshold: float
    flagged: list[FlaggedPair]
    eliminated: list[Elimination]
    retained: list[str]
    whitelist_hits: list[str]
    constant_factors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "flagged_pairs": [{"a": p.a, "b": p.b, "r": p.r} for p in self.flagged],
            "eliminated": [
                {
                    "factor": e.factor_id,
                    "degree": e.degree,
                    "reason": e.reason,
                    "pairs": [{"a": p.a, "b": p.b, "r": p.r} for p in e.pairs],
                }
                for e in self.eliminated
            ],
            "retained": list(self.retained),
            "whitelist_hits": list(self.whitelist_hits),
            "constant_factors": list(self.constant_factors),
            "warnings": list(self.warnings),
        }


def pearson_matrix(values: np.ndarray | Sequence[Sequence[float]], factor_ids: Sequence[str]) -> CorrelationMatrix:
    """Pearson r between the columns of a region x factor table.

    Columns with zero variance get undefined cells (row, column and diagonal).
    """
    x = np.asarray(values, dtype=float)
    if x.ndim != 2 or x.shape[1] != len(factor_ids):
        raise ValueError("value table must be regions x factors")
    if x.shape[0] < 2:
        raise ValueError("insufficient observations")
    if not np.all(np.isfinite(x)):
        raise ValueError("invalid observation")
    centered = x - x.mean(axis=0)
    # pre-scale by the largest deviation so tiny columns do not underflow
    scale = np.abs(centered).max(axis=0)
    constant = np.all(x == x[0], axis=0) | (scale == 0)
    centered = centered / np.where(constant, 1.0, scale)
    norms = np.sqrt((centered**2).sum(axis=0))
    z = centered / np.where(constant, 1.0, norms)
    r = np.clip(z.T @ z, -1.0, 1.0)
    defined = ~(constant[:, None] | constant[None, :])
    r = np.where(defined, r, np.nan)
    np.fill_diagonal(r, np.where(constant, np.nan, 1.0))
    return CorrelationMatrix(tuple(factor_ids), r, defined)


def flag_collinear(matrix: CorrelationMatrix, threshold: float = 0.7) -> list[FlaggedPair]:
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    ids = matrix.factor_ids
    pairs = []
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            if matrix.defined[i, j] and abs(matrix.r[i, j]) >= threshold:
                pairs.append(FlaggedPair(ids[i], ids[j], float(matrix.r[i, j])))
    pairs.sort(key=lambda p: (-abs(p.r), p.a, p.b))
    return pairs


def prune(
    matrix: CorrelationMatrix,
    flagged: Sequence[FlaggedPair],
    whitelist: set[str] | frozenset[str] = frozenset(),
    priorities: Mapping[str, int] | None = None,
    threshold: float = 0.7,
) -> ScreeningReport:
    """Greedy elimination of collinear factors.

    Each step drops the non-whitelisted factor touching the most live flagged
    pairs. Ties go to the lower expert priority, then the smaller id. Stops once
    every live pair has a whitelisted member. A final pass re-admits, in reverse
    elimination order, any dropped factor whose partners have all gone since.
    """
    priorities = priorities or {}
    unknown = set(whitelist) - set(matrix.factor_ids)
    if unknown:
        raise ValueError(f"whitelisted factors not in matrix: {sorted(unknown)}")

    def conflicts(f: str, alive: set[str]) -> list[FlaggedPair]:
        return [
            p for p in flagged
            if f in (p.a, p.b)
            and (p.b if p.a == f else p.a) in alive
            and p.a not in whitelist and p.b not in whitelist
        ]

    alive = set(matrix.factor_ids)
    eliminated: list[Elimination] = []
    while True:
        degree: dict[str, int] = {}
        for p in flagged:
            if p.a in alive and p.b in alive and not (p.a in whitelist or p.b in whitelist):
                degree[p.a] = degree.get(p.a, 0) + 1
                degree[p.b] = degree.get(p.b, 0) + 1
        if not degree:
            break
        victim = min(degree, key=lambda f: (-degree[f], priorities.get(f, 0), f))
        involved = tuple(conflicts(victim, alive))
        partners = ", ".join(p.b if p.a == victim else p.a for p in involved)
        eliminated.append(Elimination(victim, degree[victim], involved, f"collinear with {partners}"))
        alive.discard(victim)

    readmitted = []
    for e in reversed(eliminated):
        if not conflicts(e.factor_id, alive):
            alive.add(e.factor_id)
            readmitted.append(e.factor_id)
    eliminated = [e for e in eliminated if e.factor_id not in readmitted]

    warnings = [f"factor {f} re-admitted: its collinear partners were all eliminated" for f in readmitted]
    for p in flagged:
        if p.a in alive and p.b in alive and p.a in whitelist and p.b in whitelist:
            warnings.append(f"whitelisted pair {p.a}/{p.b} retained with r={p.r:.4f}")
    for w in warnings:
        logger.warning(w)
    return ScreeningReport(
        threshold=threshold,
        flagged=list(flagged),
        eliminated=eliminated,
        retained=[f for f in matrix.factor_ids if f in alive],
        whitelist_hits=sorted({f for p in flagged for f in (p.a, p.b) if f in whitelist}),
        constant_factors=list(matrix.constant_factors),
        warnings=warnings,
    )


def screen(
    values: np.ndarray,
    factor_ids: Sequence[str],
    threshold: float = 0.7,
    whitelist: set[str] | frozenset[str] = frozenset(),
    priorities: Mapping[str, int] | None = None,
) -> ScreeningReport:
    matrix = pearson_matrix(values, factor_ids)
    return prune(matrix, flag_collinear(matrix, threshold), whitelist, priorities, threshold)
