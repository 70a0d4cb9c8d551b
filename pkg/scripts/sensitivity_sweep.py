"""Sweep the weight-jitter size and report how rank agreement degrades.

    python scripts/sensitivity_sweep.py --data tests/data/golden_2013.csv --config tests/data/golden.yaml
"""

import argparse

import numpy as np

from refd.ingest import load_config, load_dataset_for
from refd.pipeline import sensitivity
from refd.synth import SyntheticSpec, generate_synthetic


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", help="dataset CSV; omit for a synthetic 83-region set")
    ap.add_argument("--config", default="default")
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epsilons", default="0,0.05,0.1,0.2,0.3,0.5")
    args = ap.parse_args()

    config = load_config(args.config)
    ds = load_dataset_for(args.data, config) if args.data else generate_synthetic(SyntheticSpec(seed=args.seed))

    print(f"{'epsilon':>7} {'rho_mean':>8} {'rho_min':>8} {'max_range':>9}")
    for eps in (float(e) for e in args.epsilons.split(",")):
        rep = sensitivity(ds, config, eps, args.trials, args.seed)
        print(
            f"{eps:>7.2f} {np.mean(rep.spearman):>8.3f} {min(rep.spearman):>8.3f}"
            f" {max(rep.rank_ranges.values()):>9d}"
        )


if __name__ == "__main__":
    main()
