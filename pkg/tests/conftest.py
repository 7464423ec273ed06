"""
Shared fixtures: small synthetic signals and their analyses.

L = 512 samples and N = 256 bins give a bin width of 2 Hz; with σ = 0.05 the
window half-support is M = 54.
"""

import numpy as np
import pytest

from rrpridge.core.base_experiment import ExperimentConfig
from rrpridge.pipeline import Analysis, analyze
from rrpridge.signal import Signal, linear_chirp, synthesize, tone

LENGTH = 512
N_BINS = 256
SIGMA = 0.05


@pytest.fixture
def tone_modes():
    return [tone(200.0)]


@pytest.fixture
def tone_signal(tone_modes) -> Signal:
    return synthesize(tone_modes, LENGTH)


@pytest.fixture
def chirp_modes():
    # IF 100 -> 300 Hz, i.e. bins 50 -> 150
    return [linear_chirp(100.0, 200.0)]


@pytest.fixture
def chirp_signal(chirp_modes) -> Signal:
    return synthesize(chirp_modes, LENGTH)


@pytest.fixture
def two_tone_modes():
    return [tone(100.0), tone(300.0)]


@pytest.fixture
def two_tone_signal(two_tone_modes) -> Signal:
    return synthesize(two_tone_modes, LENGTH)


@pytest.fixture
def tone_analysis(tone_signal) -> Analysis:
    return analyze(tone_signal, SIGMA, N_BINS)


@pytest.fixture
def chirp_analysis(chirp_signal) -> Analysis:
    return analyze(chirp_signal, SIGMA, N_BINS)


@pytest.fixture
def two_tone_analysis(two_tone_signal) -> Analysis:
    return analyze(two_tone_signal, SIGMA, N_BINS)


@pytest.fixture
def small_config() -> ExperimentConfig:
    return ExperimentConfig(
        preset="two_tones",
        preset_params={"low": 100.0, "high": 300.0},
        length=LENGTH,
        modes=2,
        n_bins=N_BINS,
        sigma=SIGMA,
        snr_grid=(10.0,),
        runs=1,
    )


@pytest.fixture
def small_overrides(tmp_path) -> dict:
    """Dotted overrides for a fast two-tone experiment writing to tmp_path."""
    return {
        "signal.preset": "two_tones",
        "signal.params": {"low": 100.0, "high": 300.0},
        "signal.length": LENGTH,
        "analysis.n_bins": N_BINS,
        "analysis.sigma": SIGMA,
        "detection.modes": 2,
        "bench.snr": [10.0],
        "bench.runs": 2,
        "bench.out_dir": str(tmp_path / "out"),
    }


def interior(values: np.ndarray, boundary: int = 54) -> np.ndarray:
    return values[..., boundary : values.shape[-1] - boundary]
