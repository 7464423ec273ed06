"""
Tests for the rrpridge command line.
"""

import json

import pytest
from loguru import logger

from rrpridge.cli import (
    build_parser,
    log_overrides_from_args,
    main,
    overrides_from_args,
)

SMALL_CONFIG = """
[signal]
preset = "two_tones"
length = 512

[signal.params]
low = 100.0
high = 300.0

[analysis]
n_bins = 256
sigma = 0.05

[detection]
modes = 2

[bench]
snr = [10.0]
runs = 1

[logging]
level = "WARNING"
"""


@pytest.fixture(autouse=True)
def release_log_sinks():
    yield
    logger.remove()


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL_CONFIG, encoding="utf-8")
    return path


def test_flags_map_to_dotted_overrides():
    """Test repeatable and comma-separated flags."""
    args = build_parser().parse_args(
        [
            "bench",
            "--snr=-10,0",
            "--snr",
            "4",
            "--method",
            "S-RD",
            "--method",
            "RRP-RD,RRP-MR",
            "--runs",
            "3",
            "--sigma",
            "renyi",
            "--tol",
            "2",
        ]
    )
    assert overrides_from_args(args) == {
        "bench.snr": [-10.0, 0.0, 4.0],
        "bench.methods": ["S-RD", "RRP-RD", "RRP-MR"],
        "bench.runs": 3,
        "analysis.sigma": "renyi",
        "fit.tol_bins": 2.0,
    }


def test_gw_flags():
    """Test the strain and NR flags of the gw subcommand."""
    args = build_parser().parse_args(["gw", "--strain", "h1.txt", "--nr", "nr.txt"])
    overrides = overrides_from_args(args)
    assert overrides["gw.strain"] == "h1.txt"
    assert overrides["gw.nr"] == "nr.txt"


def test_bad_sigma_is_a_usage_error():
    """Test that --sigma accepts only numbers or 'renyi'."""
    with pytest.raises(SystemExit):
        build_parser().parse_args(["bench", "--sigma", "wide"])


def test_no_command_prints_help(capsys):
    """Test that a bare call prints help and fails."""
    assert main([]) == 1
    assert "bench" in capsys.readouterr().out


def test_bench_command_writes_outputs(config_file, tmp_path, capsys):
    """Test a full bench run through the CLI."""
    out = tmp_path / "bench"
    assert main(["bench", "--config", str(config_file), "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["records_count"] == 14
    assert (out / "bench_records.csv").exists()
    assert (out / "bench_summary.csv").exists()
    assert (out / "manifest.json").exists()


def test_exit_code_for_config_error(config_file, tmp_path):
    """Test exit code 1 on a missing config or unknown method."""
    assert main(["bench", "--config", str(tmp_path / "absent.toml")]) == 1
    args = ["demo", "--config", str(config_file), "--method", "XYZ"]
    assert main([*args, "--out", str(tmp_path / "demo")]) == 1


def test_exit_code_for_data_error(config_file, tmp_path):
    """Test exit code 2 when the gw strain file is missing."""
    out = str(tmp_path / "gw")
    assert main(["gw", "--config", str(config_file), "--out", out]) == 2
    absent = str(tmp_path / "absent.txt")
    argv = ["gw", "--config", str(config_file), "--out", out, "--strain", absent]
    assert main(argv) == 2


def test_log_flags(config_file, tmp_path, capsys):
    """Test --log-level and --log-file, which writes the run log under --out."""
    args = build_parser().parse_args(["demo", "--log-level", "debug", "--log-file"])
    assert log_overrides_from_args(args) == {
        "logging.level": "DEBUG",
        "logging.file_enabled": True,
    }
    out = tmp_path / "bench"
    argv = ["bench", "--config", str(config_file), "--out", str(out), "--log-file"]
    argv += ["--log-level", "INFO"]
    assert main(argv) == 0
    assert (out / "bench.log").stat().st_size > 0
    assert json.loads(capsys.readouterr().out)
