"""Report envelopes and the text / CSV / JSON emitters.

Every report carries the tool version, config and dataset digests, and a
timestamp. The timestamp is the only field allowed to differ between runs on
identical inputs; set ``SOURCE_DATE_EPOCH`` to pin it.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Mapping, Sequence

from refd import __version__
from refd.ingest import Dataset
from refd.model import star_string
from refd.pipeline import RatingTable, StabilityReport, TrendReport, group_subscores
from refd.screening import ScreeningReport

FORMATS = ("text", "csv", "json")
ROUNDING_NOTE = "scores shown to 2 decimals; ranking uses full precision"


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return when.replace(microsecond=0).isoformat()


@dataclass(frozen=True)
class ReportEnvelope:
    kind: str  # rating | screening | trend | sensitivity | histogram
    payload: Mapping[str, Any]
    config_digest: str
    dataset_digest: str
    timestamp: str = ""
    tool_version: str = __version__

    def header(self) -> dict[str, str]:
        return {
            "tool": "refd",
            "tool_version": self.tool_version,
            "kind": self.kind,
            "config_digest": self.config_digest,
            "dataset_digest": self.dataset_digest,
            "timestamp": self.timestamp,
        }

    def to_dict(self) -> dict[str, Any]:
        return {**self.header(), "payload": self.payload}


def envelope(kind: str, payload: Mapping[str, Any], config_digest: str, dataset_digest: str) -> ReportEnvelope:
    return ReportEnvelope(kind, payload, config_digest, dataset_digest, _timestamp())


# ---------------------------------------------------------------------------
# Payload builders
# ---------------------------------------------------------------------------


def rating_payload(table: RatingTable, dataset: Dataset) -> dict[str, Any]:
    names = {r.id: r.name for r in dataset.regions}
    subs = group_subscores(table, dataset)
    payload = table.to_dict()
    for row in payload["results"]:
        row["region_name"] = names[row["region_id"]]
        row["stars_str"] = star_string(row["stars"])
        row["subscores"] = subs[row["region_id"]]
    payload["n_regions"] = dataset.n_regions
    payload["n_factors"] = dataset.n_factors
    payload["note"] = ROUNDING_NOTE
    return payload


def emit_histogram(table: RatingTable, factor_ids: Sequence[str] | None = None) -> dict[str, Any]:
    """Per-factor distribution of points 0..10 across regions."""
    if factor_ids is None:
        factor_ids = list(table.results[0].points) if table.results else []
    n = len(table.results)
    factors = {}
    for fid in factor_ids:
        counts = [0] * 11
        for res in table.results:
            counts[res.points[fid]] += 1
        factors[fid] = {
            "counts": counts,
            "proportions": [round(c / n, 4) for c in counts],
        }
    return {"n_regions": n, "factors": factors}


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _rows(kind: str, payload: Mapping[str, Any]) -> list[dict[str, Any]]:
    """Flatten a payload into CSV rows."""
    if kind == "rating":
        rows = []
        for r in payload["results"]:
            row = {
                "rank": r["rank"],
                "region_id": r["region_id"],
                "region_name": r["region_name"],
                "overall_score": repr(r["overall_score"]),
                "contingent_score": repr(r["contingent_score"]),
                "density_support": repr(r["density_support"]),
                "temp_support": repr(r["temp_support"]),
                "stars": r["stars"],
                "stars_str": r["stars_str"],
            }
            row.update({f"points_{k}": v for k, v in r["points"].items()})
            row.update({f"sub_{k}": ("" if v is None else repr(v)) for k, v in r["subscores"].items()})
            rows.append(row)
        return rows
    if kind == "screening":
        dropped = {e["factor"]: (step, e["reason"]) for step, e in enumerate(payload["eliminated"], start=1)}
        rows = []
        for fid in payload["factors"]:
            step, reason = dropped.get(fid, ("", ""))
            rows.append(
                {
                    "factor": fid,
                    "status": "eliminated" if fid in dropped else "retained",
                    "step": step,
                    "reason": reason,
                    "whitelisted": fid in payload["whitelist"],
                    "constant": fid in payload["constant_factors"],
                }
            )
        return rows
    if kind == "trend":
        rows = []
        years = payload["years"]
        for e in payload["regions"]:
            for k, year in enumerate(years):
                rows.append(
                    {
                        "region_id": e["region_id"],
                        "table": k,
                        "year": year,
                        "overall_score": "" if e["scores"][k] is None else repr(e["scores"][k]),
                        "rank": "" if e["ranks"][k] is None else e["ranks"][k],
                        "stars": "" if e["stars"][k] is None else e["stars"][k],
                        "score_delta": "" if k == 0 or e["score_deltas"][k - 1] is None else repr(e["score_deltas"][k - 1]),
                        "rank_delta": "" if k == 0 or e["rank_deltas"][k - 1] is None else e["rank_deltas"][k - 1],
                        "star_transition": "" if k == 0 or e["star_transitions"][k - 1] is None else e["star_transitions"][k - 1],
                        "status": e["status"],
                    }
                )
        return rows
    if kind == "sensitivity":
        return [dict(r) for r in payload["regions"]]
    if kind == "histogram":
        rows = []
        for fid, h in payload["factors"].items():
            for p in range(11):
                rows.append({"factor": fid, "points": p, "count": h["counts"][p], "proportion": h["proportions"][p]})
        return rows
    raise ValueError(f"unknown report kind {kind!r}")


def render_json(env: ReportEnvelope) -> str:
    return json.dumps(env.to_dict(), indent=2, ensure_ascii=False) + "\n"


def render_csv(env: ReportEnvelope) -> str:
    buf = io.StringIO()
    for key, value in env.header().items():
        buf.write(f"# {key}={value}\n")
    rows = _rows(env.kind, env.payload)
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return buf.getvalue()


def _table(headers: Sequence[str], rows: Sequence[Sequence[Any]], align: str) -> list[str]:
    cells = [[str(c) for c in row] for row in rows]
    widths = [max([len(h)] + [len(r[i]) for r in cells]) for i, h in enumerate(headers)]

    def fmt(row: Sequence[str]) -> str:
        return "  ".join(
            c.ljust(w) if a == "l" else c.rjust(w) for c, w, a in zip(row, widths, align)
        ).rstrip()

    return [fmt(headers), "  ".join("-" * w for w in widths)] + [fmt(r) for r in cells]


def _fmt_opt(x: float | None) -> str:
    return "-" if x is None else f"{x:.2f}"


def render_text(env: ReportEnvelope) -> str:
    p = env.payload
    lines = [f"refd {env.tool_version} | {env.kind} report | {env.timestamp}"]
    lines.append(f"config {env.config_digest[:12]}  dataset {env.dataset_digest[:12]}")
    lines.append("")
    if env.kind == "rating":
        lines.append(
            f"year {p['year']}  regions N={p['n_regions']}  factors I={p['n_factors']}  "
            f"sigma={p['stddev_mode']}  max contingent={p['max_contingent']:.2f}"
        )
        lines.append("")
        rows = [
            (
                r["rank"],
                r["region_name"],
                f"{r['overall_score']:.2f}",
                f"{r['contingent_score']:.2f}",
                f"{r['density_support']:.2f}",
                f"{r['temp_support']:.2f}",
                r["stars_str"],
            )
            for r in p["results"]
        ]
        lines += _table(("Rank", "Region", "Overall", "R", "D", "T", "Category"), rows, "rlrrrrl")
        lines.append("")
        groups = list(p["results"][0]["subscores"]) if p["results"] else []
        sub_rows = [(r["region_name"], *(_fmt_opt(r["subscores"][g]) for g in groups)) for r in p["results"]]
        lines += _table(("Region", *groups), sub_rows, "l" + "r" * len(groups))
        lines.append("")
        lines.append(f"note: {p['note']}")
    elif env.kind == "screening":
        lines.append(f"threshold |r| >= {p['threshold']}")
        lines.append("")
        rows = [(fp["a"], fp["b"], f"{fp['r']:+.4f}") for fp in p["flagged_pairs"]]
        lines += _table(("Factor A", "Factor B", "r"), rows, "llr") if rows else ["no flagged pairs"]
        lines.append("")
        for step, e in enumerate(p["eliminated"], start=1):
            lines.append(f"{step}. drop {e['factor']} ({e['reason']})")
        lines.append(f"retained ({len(p['retained'])}): {', '.join(p['retained'])}")
        if p["whitelist_hits"]:
            lines.append(f"whitelist kept: {', '.join(p['whitelist_hits'])}")
        if p["constant_factors"]:
            lines.append(f"constant (r undefined): {', '.join(p['constant_factors'])}")
    elif env.kind == "trend":
        years = p["years"]
        rows = []
        for e in p["regions"]:
            rows.append(
                (
                    e["region_id"],
                    *(_fmt_opt(s) for s in e["scores"]),
                    " ".join("-" if d is None else f"{d:+.2f}" for d in e["score_deltas"]),
                    " ".join("-" if d is None else f"{d:+d}" for d in e["rank_deltas"]),
                    " ".join("-" if t is None else t for t in e["star_transitions"]),
                    e["status"],
                )
            )
        headers = ("Region", *(str(y) for y in years), "dScore", "dRank", "Stars", "Status")
        lines += _table(headers, rows, "l" + "r" * len(years) + "lllll")
    elif env.kind == "sensitivity":
        s = p["spearman"]
        lines.append(f"epsilon={p['epsilon']}  trials={p['trials']}  seed={p['seed']}")
        lines.append(f"spearman vs baseline: mean {s['mean']:.4f}  min {s['min']:.4f}  max {s['max']:.4f}")
        lines.append("")
        rows = [(r["region_id"], r["baseline_rank"], r["min_rank"], r["max_rank"], r["range"]) for r in p["regions"]]
        lines += _table(("Region", "Baseline", "Best", "Worst", "Range"), rows, "lrrrr")
    elif env.kind == "histogram":
        n = p["n_regions"]
        for fid, h in p["factors"].items():
            lines.append(f"{fid} (N={n})")
            top = max(h["counts"]) or 1
            for pts, (c, q) in enumerate(zip(h["counts"], h["proportions"])):
                bar = "#" * round(40 * c / top)
                lines.append(f"  {pts:>2} | {bar:<40} {c:>6}  {q:.4f}")
            lines.append("")
    else:
        raise ValueError(f"unknown report kind {env.kind!r}")
    return "\n".join(lines).rstrip() + "\n"


def render(env: ReportEnvelope, fmt: str) -> str:
    if fmt == "json":
        return render_json(env)
    if fmt == "csv":
        return render_csv(env)
    if fmt == "text":
        return render_text(env)
    raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# Parsers (round-trip checks)
# ---------------------------------------------------------------------------


def parse_json_report(text: str) -> dict[str, Any]:
    return json.loads(text)


def parse_csv_report(text: str) -> tuple[dict[str, str], list[dict[str, str]]]:
    meta = {}
    body = []
    for line in text.splitlines(keepends=True):
        if line.startswith("# ") and not body:
            key, _, value = line[2:].rstrip("\n").partition("=")
            meta[key] = value
        else:
            body.append(line)
    rows = list(csv.DictReader(io.StringIO("".join(body))))
    return meta, rows


def strip_timestamp(text: str) -> str:
    """Drop timestamp lines/fields so reports can be compared byte-for-byte."""
    out = []
    for line in text.splitlines(keepends=True):
        if line.startswith("# timestamp=") or line.lstrip().startswith('"timestamp":'):
            continue
        if line.startswith("refd ") and " | " in line:
            line = line.rsplit(" | ", 1)[0] + "\n"
        out.append(line)
    return "".join(out)


def screening_payload(report: ScreeningReport, factor_ids: Sequence[str], whitelist: Sequence[str]) -> dict[str, Any]:
    payload = report.to_dict()
    payload["factors"] = list(factor_ids)
    payload["whitelist"] = sorted(whitelist)
    return payload


def trend_payload(report: TrendReport) -> dict[str, Any]:
    return report.to_dict()


def sensitivity_payload(report: StabilityReport) -> dict[str, Any]:
    return report.to_dict()
