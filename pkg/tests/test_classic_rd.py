"""
Tests for the peeling detectors S-RD and MB-RD.
"""

import numpy as np
import pytest

from rrpridge.classic_rd import (
    MASKED,
    _track,
    band_half_width,
    detect_mbrd,
    detect_srd,
    init_indices,
    ridges_frame,
)
from rrpridge.core.errors import ConfigError, DetectionError
from rrpridge.tfr import round_half_away
from tests.conftest import LENGTH


def test_init_indices_are_unique_and_inside():
    """Test that init indices lie in [M, L-1-M] without duplicates."""
    inits = init_indices(512, 54, 16)
    assert inits[0] == 54 and inits[-1] == 512 - 1 - 54
    assert np.all(np.diff(inits) > 0)
    assert init_indices(20, 2, 100).size == 16


def test_init_indices_reject_zero_count():
    """Test that init_count < 1 is rejected."""
    with pytest.raises(ConfigError):
        init_indices(512, 54, 0)


def test_band_half_width_rounds_up():
    """Test the peeling band half-width ceil(ΔN/L)."""
    assert band_half_width(100.0, 512, 256) == 50
    assert band_half_width(1.0, 512, 256) == 1


def test_srd_follows_a_tone(tone_analysis):
    """Test that S-RD returns the constant tone bin."""
    (ridge,) = detect_srd(tone_analysis.grid, 1, 10.0, 100.0)
    assert np.all(ridge.phi == 100)
    assert ridge.energy > 0
    np.testing.assert_allclose(ridge.frequencies(tone_analysis.grid.bin_width), 200.0)


def test_srd_separates_two_tones(two_tone_analysis):
    """Test that peeling recovers both tones, one per ridge."""
    ridges = detect_srd(two_tone_analysis.grid, 2, 10.0, 100.0)
    assert sorted(int(np.median(r.phi)) for r in ridges) == [50, 150]


def test_mbrd_follows_a_linear_chirp(chirp_analysis):
    """Test that MB-RD stays within one bin of the chirp IF."""
    (ridge,) = detect_mbrd(chirp_analysis.grid, chirp_analysis.qhat, 1, 2, 100.0)
    n = np.arange(54, LENGTH - 54)
    truth = round_half_away((100.0 + 200.0 * n / LENGTH) / 2.0)
    assert np.max(np.abs(ridge.phi[n] - truth)) <= 1


def test_srd_rejects_non_positive_bound(tone_analysis):
    """Test that B_f <= 0 raises ConfigError."""
    with pytest.raises(ConfigError):
        detect_srd(tone_analysis.grid, 1, 0.0, 100.0)


def test_mbrd_rejects_negative_slack(chirp_analysis):
    """Test that C < 0 raises ConfigError."""
    with pytest.raises(ConfigError):
        detect_mbrd(chirp_analysis.grid, chirp_analysis.qhat, 1, -1, 100.0)


def test_peeling_bands_covering_spectrum_raise(tone_analysis):
    """Test that P bands wider than the spectrum raise DetectionError."""
    with pytest.raises(DetectionError):
        detect_srd(tone_analysis.grid, 2, 10.0, 300.0)


def test_ridges_frame_columns(tone_analysis):
    """Test the ridge export layout."""
    ridges = detect_srd(tone_analysis.grid, 1, 10.0, 100.0)
    frame = ridges_frame(ridges, tone_analysis.grid.bin_width)
    assert list(frame.columns) == ["mode", "n", "bin", "frequency_hz"]
    assert len(frame) == LENGTH
    assert ridges_frame([], 2.0).empty


def test_track_holds_in_a_fully_peeled_window():
    """Test that a step whose whole window is peeled keeps the previous bin."""
    magnitude = np.zeros((4, 8))
    magnitude[0, 2] = 3.0
    magnitude[1, :] = MASKED
    magnitude[1, 7] = 5.0
    magnitude[2, 3] = 2.0
    magnitude[3, 3] = 2.0

    def hold(n: int, phi: np.ndarray, direction: int) -> np.ndarray:
        return phi

    paths = _track(magnitude, np.array([0]), hold, 1)
    assert paths[0].tolist() == [2, 2, 3, 3]
    backward = _track(magnitude, np.array([3]), hold, 1)
    assert backward[0].tolist() == [2, 3, 3, 3]
