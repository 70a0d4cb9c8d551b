import io
import json
import subprocess
import sys
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from refd.cli import main
from refd.report import parse_csv_report, parse_json_report, strip_timestamp

DATA = Path(__file__).parent / "data"
GOLDEN = str(DATA / "golden_2013.csv")
GOLDEN_CFG = str(DATA / "golden.yaml")


def run(argv, capsys, stdin=None, monkeypatch=None):
    if stdin is not None:
        monkeypatch.setattr(sys, "stdin", io.StringIO(stdin))
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_rate_json(capsys):
    code, out, _ = run(["rate", "--data", GOLDEN, "--config", GOLDEN_CFG, "--format", "json"], capsys)
    assert code == 0
    doc = parse_json_report(out)
    assert doc["kind"] == "rating" and len(doc["config_digest"]) == 64 and len(doc["dataset_digest"]) == 64
    ranks = {r["region_id"]: r["rank"] for r in doc["payload"]["results"]}
    assert ranks == {"E": 1, "A": 2, "D": 3, "C": 4, "B": 5}
    assert doc["payload"]["results"][0]["stars_str"] == "****"


def test_rate_text_rounds_to_two_decimals(capsys):
    code, out, err = run(["rate", "--data", GOLDEN, "--config", GOLDEN_CFG], capsys)
    assert code == 0
    assert "7.00" in out and "3.25" in out and "full precision" in out
    assert "warning" in err  # region C matches no support row


def test_rate_csv_round_trip(capsys):
    code, out, _ = run(["rate", "--data", GOLDEN, "--config", GOLDEN_CFG, "--format", "csv"], capsys)
    assert code == 0
    meta, rows = parse_csv_report(out)
    assert meta["kind"] == "rating"
    assert [r["region_id"] for r in rows] == ["E", "A", "D", "C", "B"]
    assert float(rows[0]["overall_score"]) == 7.0
    assert rows[0]["sub_development_promotion"] == ""


def test_missing_data_file(capsys):
    code, _, err = run(["rate", "--data", "missing.csv", "--config", "default"], capsys)
    assert code == 1
    assert "missing.csv" in err


def test_strict_turns_warnings_into_errors(capsys):
    code, out, err = run(["rate", "--data", GOLDEN, "--config", GOLDEN_CFG, "--strict"], capsys)
    assert code == 1 and out == "" and "strict" in err


def test_unknown_flag_is_usage_error(capsys):
    code, _, err = run(["rate", "--bogus"], capsys)
    assert code == 2 and "usage" in err


def test_env_config_fallback(capsys, monkeypatch):
    monkeypatch.setenv("REFD_CONFIG", GOLDEN_CFG)
    code, out, _ = run(["rate", "--data", GOLDEN, "--format", "json"], capsys)
    assert code == 0
    assert parse_json_report(out)["payload"]["policies"]["infrastructure_stadiums"] == "cluster"


def test_stddev_flag(capsys):
    code, out, _ = run(["rate", "--data", GOLDEN, "--config", GOLDEN_CFG, "--format", "json", "--stddev", "sample"], capsys)
    assert code == 0 and parse_json_report(out)["payload"]["stddev_mode"] == "sample"


def test_validate(capsys):
    code, _, err = run(["validate", "--data", GOLDEN, "--config", GOLDEN_CFG], capsys)
    assert code == 0 and "5 regions, 4 factors" in err


def test_validate_bad_config(capsys, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("categories: {5: 6, 4: 8, 3: 4.5, 2: 2.5}\n")
    code, _, err = run(["validate", "--data", GOLDEN, "--config", str(cfg)], capsys)
    assert code == 1 and "thresholds not decreasing" in err


def test_screen(capsys, tmp_path):
    code, out, _ = run(["screen", "--data", GOLDEN, "--config", GOLDEN_CFG, "--format", "json"], capsys)
    assert code == 0
    payload = parse_json_report(out)["payload"]
    assert set(payload["retained"]) | {e["factor"] for e in payload["eliminated"]} == set(payload["factors"])
    code, out, _ = run(["screen", "--data", GOLDEN, "--config", GOLDEN_CFG, "--format", "csv"], capsys)
    meta, rows = parse_csv_report(out)
    assert meta["kind"] == "screening" and len(rows) == 4


def test_trend(capsys, tmp_path):
    second = tmp_path / "golden_2014.csv"
    second.write_text((DATA / "golden_2013.csv").read_text().replace("A,Region A,3000000,-11,60,10", "A,Region A,3000000,-11,60,60"))
    code, out, _ = run(
        ["trend", "--data", GOLDEN, "--data", str(second), "--config", GOLDEN_CFG, "--format", "json"], capsys
    )
    assert code == 0
    payload = parse_json_report(out)["payload"]
    assert payload["years"] == [2013, 2014]
    a = next(e for e in payload["regions"] if e["region_id"] == "A")
    assert a["score_deltas"][0] > 0


def test_sensitivity_cli(capsys):
    argv = ["sensitivity", "--data", GOLDEN, "--config", GOLDEN_CFG, "--epsilon", "0.2", "--trials", "100", "--seed", "2013", "--format", "json"]
    code, out, _ = run(argv, capsys)
    assert code == 0
    expected = json.loads((DATA / "sensitivity_golden.json").read_text())
    assert parse_json_report(out)["payload"] == expected


def test_histogram(capsys):
    code, out, _ = run(["histogram", "--data", GOLDEN, "--config", GOLDEN_CFG, "--factor", "elite_sport_attendance"], capsys)
    assert code == 0
    assert "elite_sport_attendance (N=5)" in out
    code, out, _ = run(["histogram", "--data", GOLDEN, "--config", GOLDEN_CFG, "--format", "csv"], capsys)
    _, rows = parse_csv_report(out)
    assert len(rows) == 44
    assert sum(int(r["count"]) for r in rows if r["factor"] == "grassroots_growth") == 5


def test_histogram_unknown_factor(capsys):
    code, _, err = run(["histogram", "--data", GOLDEN, "--config", GOLDEN_CFG, "--factor", "nope"], capsys)
    assert code == 1 and "nope" in err


def test_synth_to_file(capsys, tmp_path):
    out = tmp_path / "s.csv"
    code, _, _ = run(["synth", "--regions", "10", "--seed", "3", "--out", str(out)], capsys)
    assert code == 0 and out.read_text().count("\n") == 11


def test_stdin_data(capsys, monkeypatch):
    code, out, _ = run(["rate", "--config", GOLDEN_CFG, "--format", "json"], capsys, (DATA / "golden_2013.csv").read_text(), monkeypatch)
    assert code == 0 and len(parse_json_report(out)["payload"]["results"]) == 5


@pytest.mark.parametrize("fmt", ["json", "csv", "text"])
def test_reports_identical_apart_from_timestamp(capsys, fmt):
    argv = ["rate", "--data", GOLDEN, "--config", GOLDEN_CFG, "--format", fmt]
    _, a, _ = run(argv, capsys)
    _, b, _ = run(argv, capsys)
    assert strip_timestamp(a) == strip_timestamp(b)


def test_pipe_end_to_end_snapshot():
    synth = subprocess.run(
        [sys.executable, "-m", "refd", "synth", "--regions", "83", "--seed", "7"], capture_output=True, text=True, check=True
    )
    rate = subprocess.run(
        [sys.executable, "-m", "refd", "rate", "--config", "default", "--format", "json"],
        input=synth.stdout, capture_output=True, text=True, check=True,
    )
    assert rate.stderr == ""
    assert strip_timestamp(rate.stdout) == (DATA / "synth83_seed7_rating.json").read_text()


COMMANDS = ["rate", "screen", "trend", "sensitivity", "histogram", "synth", "validate"]


@settings(max_examples=60, deadline=None)
@given(
    st.one_of(
        st.lists(st.sampled_from(["--bogus", "-x", "--format=xml", "--trials=abc", "--stddev=median", "--epsilon=x"]), min_size=1, max_size=3).map(
            lambda flags: ["rate", *flags]
        ),
        st.lists(st.text(alphabet="abcxyz-", min_size=1, max_size=6), min_size=1, max_size=3).filter(
            lambda a: a[0] not in COMMANDS and not a[0].startswith("--v") and not a[0].startswith("--h")
        ),
        st.just([]),
    )
)
def test_usage_errors_exit_2(argv):
    assert main(argv) == 2


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(COMMANDS[:5] + ["validate"]), st.sampled_from(["nope.csv", "/nonexistent/x.csv"]))
def test_validation_errors_exit_1(cmd, path):
    assert main([cmd, "--data", path, "--config", "default"]) == 1
