"""Compare the empirical point distribution of a normal factor with the
normal-CDF mass of each band.

    python scripts/point_distribution.py --n 100000 --seed 2013
"""

import argparse
import math

import numpy as np

from refd.model import IntervalTable, allocate_points_array, compute_factor_stats


def band_masses(edges):
    cdf = [0.0] + [0.5 * (1 + math.erf(e / math.sqrt(2))) for e in edges] + [1.0]
    return [hi - lo for lo, hi in zip(cdf, cdf[1:])]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=2013)
    ap.add_argument("--symmetric", action="store_true", help="use the symmetric upper bands")
    args = ap.parse_args()

    table = IntervalTable.default(args.symmetric)
    x = np.random.default_rng(args.seed).standard_normal(args.n)
    pts = allocate_points_array(x, compute_factor_stats(x), table)
    observed = np.bincount(pts, minlength=11) / args.n
    expected = band_masses(table.edges)

    print(f"{'points':>6} {'expected':>9} {'observed':>9} {'diff':>8}")
    for p, (e, o) in enumerate(zip(expected, observed)):
        print(f"{p:>6} {e:>9.4f} {o:>9.4f} {o - e:>+8.4f}  {'#' * round(o * 200)}")
    print(f"max |diff| = {np.max(np.abs(observed - expected)):.4f}")


if __name__ == "__main__":
    main()
