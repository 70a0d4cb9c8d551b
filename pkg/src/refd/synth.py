"""Seeded synthetic regional datasets for tests and demos."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from refd.ingest import Dataset
from refd.model import CriteriaGroup, FactorDefinition, RegionRecord, ValueKind


@dataclass(frozen=True)
class Distribution:
    kind: str = "normal"  # normal | lognormal | constant
    a: float = 50.0  # mean / log-mean / constant value
    b: float = 10.0  # sigma / log-sigma; ignored for constant

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "normal":
            return rng.normal(self.a, self.b, n)
        if self.kind == "lognormal":
            return rng.lognormal(self.a, self.b, n)
        if self.kind == "constant":
            return np.full(n, float(self.a))
        raise ValueError(f"unknown distribution {self.kind!r}")


@dataclass(frozen=True)
class SyntheticSpec:
    regions: int = 83
    factors_per_group: int = 4
    distribution: Distribution = field(default_factory=Distribution)
    overrides: Mapping[str, Distribution] = field(default_factory=dict)
    population_range: tuple[int, int] = (300_000, 12_000_000)
    temp_range: tuple[float, float] = (-19.5, -10.5)
    density_range: tuple[float, float] = (50.0, 100.0)
    seed: int = 0
    decimals: int | None = 4


def factor_ids(spec: SyntheticSpec) -> list[str]:
    return [f"{g.value}_{k + 1}" for g in CriteriaGroup for k in range(spec.factors_per_group)]


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    if spec.regions < 2:
        raise ValueError(f"synthetic dataset needs at least 2 regions, got {spec.regions}")
    if spec.factors_per_group < 1:
        raise ValueError("factors_per_group must be >= 1")
    rng = np.random.default_rng(spec.seed)
    n = spec.regions

    lo, hi = spec.population_range
    population = np.exp(rng.uniform(np.log(lo), np.log(hi), n)).astype(np.int64)
    temp = rng.uniform(*spec.temp_range, n)
    density = rng.uniform(*spec.density_range, n)

    defs = []
    columns = {}
    for fid in factor_ids(spec):
        group = CriteriaGroup(fid.rsplit("_", 1)[0])
        defs.append(FactorDefinition(fid, fid, group, ValueKind.RELATIVE))
        columns[fid] = spec.overrides.get(fid, spec.distribution).sample(rng, n)

    def tidy(x: float) -> float:
        return round(float(x), spec.decimals) if spec.decimals is not None else float(x)

    width = len(str(n))
    regions = tuple(
        RegionRecord(
            id=f"R{i + 1:0{width}d}",
            name=f"Region {i + 1}",
            population=max(1, int(population[i])),
            january_mean_temp=tidy(temp[i]),
            population_density=tidy(density[i]),
            factor_values={fid: tidy(col[i]) for fid, col in columns.items()},
        )
        for i in range(n)
    )
    return Dataset(year=0, regions=regions, factors=tuple(defs), provenance={"synthetic": f"seed={spec.seed}"})
