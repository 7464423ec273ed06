"""
Protocol-scale checks on the default presets (deselected by default).

Run with: pytest -m slow
"""

import pytest

from rrpridge.core.results import read_table
from rrpridge.experiments.bench.experiment import BenchExperiment

SNR_POINTS = [-10.0, -5.0, 0.0]


def mean_snr(summary, method: str, input_snr: float) -> float:
    rows = summary[
        (summary["method"] == method) & (summary["input_snr_db"] == input_snr)
    ]
    return float(rows["mean_output_snr_db"].mean())


def bench_summary(tmp_path, methods: list[str]):
    result = BenchExperiment(
        **{
            "signal.preset": "two_linear",
            "bench.snr": SNR_POINTS,
            "bench.runs": 10,
            "bench.methods": methods,
            "bench.out_dir": str(tmp_path),
        }
    ).run()
    return read_table(result["summary_path"])


@pytest.mark.slow
def test_rrp_rd_beats_peeling_on_two_linear_chirps(tmp_path):
    """Test that RRP-RD has the best mean IF output SNR at every input SNR."""
    summary = bench_summary(tmp_path, ["S-RD", "MB-RD", "RRP-RD"])
    for snr in SNR_POINTS:
        rrp = mean_snr(summary, "RRP-RD", snr)
        assert rrp > mean_snr(summary, "S-RD", snr), snr
        assert rrp > mean_snr(summary, "MB-RD", snr), snr
    rrp = mean_snr(summary, "RRP-RD", -10.0)
    assert rrp >= mean_snr(summary, "S-RD", -10.0) + 3.0
    assert rrp >= mean_snr(summary, "MB-RD", -10.0) + 3.0


@pytest.mark.slow
def test_lcr_reconstruction_beats_band_summation(tmp_path):
    """Test that RRP-MR-LCR gives the best signal output SNR at -10 dB."""
    summary = bench_summary(tmp_path, ["S-MR", "MB-MR", "RRP-MR", "RRP-MR-LCR"])
    lcr = mean_snr(summary, "RRP-MR-LCR", -10.0)
    for method in ("RRP-MR", "S-MR", "MB-MR"):
        assert lcr > mean_snr(summary, method, -10.0), method
