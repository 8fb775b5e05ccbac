import numpy as np
import pytest

from airgunkit.cli import main
from airgunkit.pipeline import CATALOG_HEADER
from airgunkit.pulse_detect import EVENTS_HEADER

SYNTH_ARGS = [
    "synth",
    "--channels", "1",
    "--duration-s", "35",
    "--pulse-count", "3",
    "--noise-rms-upa", "0",
    "--seed", "9",
]


@pytest.fixture(scope="module")
def survey_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_survey")
    assert main(SYNTH_ARGS + ["--out", str(out)]) == 0
    return out


# ---------------------------------------------------------------------------
# exit codes


def test_no_subcommand_is_usage_error(capsys):
    assert main([]) == 1
    assert "error" in capsys.readouterr().err.lower()


def test_unknown_subcommand_is_usage_error():
    assert main(["frobnicate"]) == 1


def test_unknown_flag_is_usage_error():
    assert main(["synth", "--out", "x", "--banana", "7"]) == 1


def test_missing_required_flag_is_usage_error(capsys):
    assert main(["detect"]) == 1
    err = capsys.readouterr().err
    assert "--manifest" in err


def test_missing_manifest_file_is_runtime_error(tmp_path):
    code = main(
        ["detect", "--manifest", str(tmp_path / "no.txt"), "--out", str(tmp_path / "e.csv")]
    )
    assert code == 2


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "usage" in capsys.readouterr().out.lower()
    assert main(["extract", "--help"]) == 0
    assert "--run-id" in capsys.readouterr().out


def test_bad_weighting_is_usage_error(survey_dir, tmp_path):
    code = main(
        [
            "detect",
            "--manifest", str(survey_dir / "manifest.txt"),
            "--out", str(tmp_path / "e.csv"),
            "--weightings", "blorp",
        ]
    )
    assert code == 1


def test_bad_numeric_flag_is_usage_error(survey_dir, tmp_path):
    code = main(
        [
            "extract",
            "--manifest", str(survey_dir / "manifest.txt"),
            "--out", str(tmp_path / "c.csv"),
            "--min-ipi-s", "0.5",  # below the search window
        ]
    )
    assert code == 1


# ---------------------------------------------------------------------------
# synth


def test_synth_writes_expected_files(survey_dir):
    assert (survey_dir / "manifest.txt").is_file()
    assert (survey_dir / "ground_truth.csv").is_file()
    assert (survey_dir / "ch00.wav").is_file()


def test_synth_rejects_overfull_schedule(tmp_path):
    code = main(
        ["synth", "--out", str(tmp_path), "--duration-s", "10", "--pulse-count", "5"]
    )
    assert code == 1


# ---------------------------------------------------------------------------
# detect


def test_detect_writes_events(survey_dir, tmp_path, capsys):
    out = tmp_path / "events.csv"
    code = main(
        [
            "detect",
            "--manifest", str(survey_dir / "manifest.txt"),
            "--out", str(out),
        ]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == EVENTS_HEADER
    assert len(lines) == 1 + 3  # three pulses on the linear stream
    assert lines[1].split(",")[1] == "linear"
    assert lines[-1].split(",")[-1] == "NA"  # last pulse has no next arrival


def test_detect_all_weightings(survey_dir, tmp_path):
    out = tmp_path / "events.csv"
    code = main(
        [
            "detect",
            "--manifest", str(survey_dir / "manifest.txt"),
            "--out", str(out),
            "--weighting", "all",
        ]
    )
    assert code == 0
    lines = out.read_text().splitlines()[1:]
    weightings = {ln.split(",")[1] for ln in lines}
    assert weightings == {"linear", "lfc", "mfc"}


def test_detect_dump_filters(survey_dir, tmp_path, capsys):
    code = main(
        [
            "detect",
            "--manifest", str(survey_dir / "manifest.txt"),
            "--out", str(tmp_path / "e.csv"),
            "--dump-filters",
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "sos" in out or "section" in out


# ---------------------------------------------------------------------------
# extract


def test_extract_end_to_end(survey_dir, tmp_path, capsys):
    out = tmp_path / "catalog.csv"
    code = main(
        [
            "extract",
            "--manifest", str(survey_dir / "manifest.txt"),
            "--out", str(out),
            "--run-id", "cli-test",
        ]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == CATALOG_HEADER
    assert len(lines) == 1 + 3 * 3  # 3 pulses x 3 weightings
    assert all(ln.startswith("cli-test,") for ln in lines[1:])

    summary = (tmp_path / "catalog.csv.summary.txt").read_text()
    assert "threshold_db=100.0" in summary
    assert "csel_scope=run" in summary
    assert "records=9" in summary
    stdout = capsys.readouterr().out
    assert "records=9" in stdout


def test_extract_twice_is_byte_identical(survey_dir, tmp_path):
    args = lambda p: [
        "extract",
        "--manifest", str(survey_dir / "manifest.txt"),
        "--out", str(p),
    ]
    assert main(args(tmp_path / "a.csv")) == 0
    assert main(args(tmp_path / "b.csv")) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_extract_flag_overrides_config_overrides_default(survey_dir, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("threshold-db = 90\nrun-id = from-config\n")
    out = tmp_path / "c.csv"
    code = main(
        [
            "extract",
            "--manifest", str(survey_dir / "manifest.txt"),
            "--out", str(out),
            "--config", str(cfg),
            "--threshold-db", "95",
        ]
    )
    assert code == 0
    summary = (tmp_path / "c.csv.summary.txt").read_text()
    # the flag beat the config file
    assert "threshold_db=95" in summary
    # the config beat the built-in default
    assert "run_id=from-config" in summary
    assert out.read_text().splitlines()[1].startswith("from-config,")


def test_unknown_config_key_is_usage_error(survey_dir, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("thresold-db = 90\n")
    code = main(
        [
            "extract",
            "--manifest", str(survey_dir / "manifest.txt"),
            "--out", str(tmp_path / "c.csv"),
            "--config", str(cfg),
        ]
    )
    assert code == 1


def test_extract_channel_subset(survey_dir, tmp_path):
    out = tmp_path / "c.csv"
    code = main(
        [
            "extract",
            "--manifest", str(survey_dir / "manifest.txt"),
            "--out", str(out),
            "--channels", "0",
            "--weightings", "linear",
        ]
    )
    assert code == 0
    assert len(out.read_text().splitlines()) == 1 + 3


def test_extract_unknown_channel_is_runtime_error(survey_dir, tmp_path):
    code = main(
        [
            "extract",
            "--manifest", str(survey_dir / "manifest.txt"),
            "--out", str(tmp_path / "c.csv"),
            "--channels", "5",
        ]
    )
    assert code == 2


# ---------------------------------------------------------------------------
# bench


def test_bench_reports_identical_catalogs(survey_dir, tmp_path, capsys):
    code = main(
        [
            "bench",
            "--manifest", str(survey_dir / "manifest.txt"),
            "--out-dir", str(tmp_path),
            "--workers", "2",
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "identical=true" in out
    assert "speedup=" in out
    assert (tmp_path / "catalog_serial.csv").is_file()
    assert (tmp_path / "catalog_parallel.csv").is_file()
