"""Command-line interface.

Exit codes: 0 success, 1 validation/runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from refd import __version__
from refd.ingest import (
    Dataset,
    ModelConfig,
    ValidationError,
    load_config,
    load_dataset_for,
    serialize_dataset,
)
from refd.model import StddevMode
from refd.pipeline import compare_years, run_rating, sensitivity
from refd.report import (
    FORMATS,
    emit_histogram,
    envelope,
    rating_payload,
    render,
    screening_payload,
    sensitivity_payload,
    trend_payload,
)
from refd.screening import screen
from refd.synth import Distribution, SyntheticSpec, generate_synthetic

logger = logging.getLogger("refd")


class StrictModeError(Exception):
    pass


def _common(p: argparse.ArgumentParser, data: bool = True, multi: bool = False) -> None:
    if data:
        if multi:
            p.add_argument("--data", action="append", required=True, help="dataset CSV (repeat per year)")
        else:
            p.add_argument("--data", default="-", help="dataset CSV; '-' reads stdin (default)")
    p.add_argument("--config", help="YAML config, or 'default' (fallback: $REFD_CONFIG)")
    p.add_argument("--format", choices=FORMATS, default="text")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--stddev", choices=[m.value for m in StddevMode], help="override the config's sigma mode")
    p.add_argument("--strict", action="store_true", help="treat warnings as errors")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="refd", description="Regional efficiency rating engine")
    parser.add_argument("--version", action="version", version=f"refd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("rate", help="rate regions and rank them"))
    _common(sub.add_parser("screen", help="correlation screening and pruning report"))
    _common(sub.add_parser("validate", help="check dataset and config only"))

    p = sub.add_parser("trend", help="compare ratings across years")
    _common(p, multi=True)
    p.add_argument("--years", help="comma-separated year labels, one per --data")

    p = sub.add_parser("sensitivity", help="rank stability under weight jitter")
    _common(p)
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("histogram", help="per-factor point distribution")
    _common(p)
    p.add_argument("--factor", action="append", help="restrict to these factor ids")

    p = sub.add_parser("synth", help="generate a seeded synthetic dataset (CSV)")
    p.add_argument("--regions", type=int, default=83)
    p.add_argument("--factors-per-group", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--distribution", choices=["normal", "lognormal"], default="normal")
    p.add_argument("--mean", type=float, default=50.0)
    p.add_argument("--sd", type=float, default=10.0)
    p.add_argument("--constant", action="append", default=[], help="factor id to hold constant")
    p.add_argument("--out")
    return parser


def _config(args: argparse.Namespace) -> ModelConfig:
    path = args.config or os.environ.get("REFD_CONFIG")
    config = load_config(path)
    if args.stddev:
        config = dataclasses.replace(config, stddev_mode=StddevMode(args.stddev))
    return config


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _check_warnings(warnings: Sequence[str], strict: bool) -> None:
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    if strict and warnings:
        raise StrictModeError(f"{len(warnings)} warning(s) in strict mode")


def _year_override(datasets: list[Dataset], years: str | None) -> list[Dataset]:
    if years:
        labels = [int(y) for y in years.split(",")]
        if len(labels) != len(datasets):
            raise ValidationError("--years needs one label per --data")
    elif all(d.year == 0 for d in datasets):
        labels = list(range(1, len(datasets) + 1))
    else:
        return datasets
    return [dataclasses.replace(d, year=y) for d, y in zip(datasets, labels)]


def _run(args: argparse.Namespace) -> None:
    if args.command == "synth":
        overrides = {fid: Distribution("constant", args.mean) for fid in args.constant}
        spec = SyntheticSpec(
            regions=args.regions,
            factors_per_group=args.factors_per_group,
            distribution=Distribution(args.distribution, args.mean, args.sd),
            overrides=overrides,
            seed=args.seed,
        )
        _write(serialize_dataset(generate_synthetic(spec)), args.out)
        return

    config = _config(args)

    if args.command == "trend":
        datasets = _year_override([load_dataset_for(p, config) for p in args.data], args.years)
        tables = [run_rating(d, config) for d in datasets]
        _check_warnings([f"{t.year}: {w}" for t in tables for w in t.warnings], args.strict)
        digest = "+".join(d.digest()[:16] for d in datasets)
        env = envelope("trend", trend_payload(compare_years(tables)), config.digest(), digest)
        _write(render(env, args.format), args.out)
        return

    dataset = load_dataset_for(args.data, config)

    if args.command == "validate":
        config.weights_for(dataset.factor_ids)
        print(
            f"ok: {dataset.n_regions} regions, {dataset.n_factors} factors, config {config.digest()[:12]}",
            file=sys.stderr,
        )
        return

    if args.command == "screen":
        report = screen(
            dataset.matrix(),
            dataset.factor_ids,
            config.screening_threshold,
            config.whitelist & set(dataset.factor_ids),
            config.priorities,
        )
        _check_warnings(report.warnings, args.strict)
        payload = screening_payload(report, dataset.factor_ids, sorted(config.whitelist))
        _write(render(envelope("screening", payload, config.digest(), dataset.digest()), args.format), args.out)
        return

    if args.command == "sensitivity":
        report = sensitivity(dataset, config, args.epsilon, args.trials, args.seed)
        env = envelope("sensitivity", sensitivity_payload(report), config.digest(), dataset.digest())
        _write(render(env, args.format), args.out)
        return

    table = run_rating(dataset, config)
    _check_warnings(table.warnings, args.strict)
    if args.command == "histogram":
        unknown = sorted(set(args.factor or ()) - set(dataset.factor_ids))
        if unknown:
            raise ValidationError(f"unknown factor {unknown[0]!r}")
        payload = emit_histogram(table, args.factor or dataset.factor_ids)
        env = envelope("histogram", payload, config.digest(), dataset.digest())
    else:
        env = envelope("rating", rating_payload(table, dataset), config.digest(), dataset.digest())
    _write(render(env, args.format), args.out)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    # pipeline warnings are surfaced explicitly via _check_warnings
    logging.getLogger("refd").setLevel(logging.ERROR)
    try:
        _run(args)
    except (ValidationError, StrictModeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
