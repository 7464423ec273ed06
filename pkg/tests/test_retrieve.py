"""
Tests for band summation and linear-chirp reconstruction.
"""

import numpy as np
import pytest

from rrpridge.classic_rd import detect_srd
from rrpridge.core.errors import ConfigError
from rrpridge.retrieve import (
    classic_bands,
    estimates_frame,
    lcr_grid,
    reconstruct_band,
    reconstruct_classic,
    reconstruct_lcr,
)
from rrpridge.ridge_fit import BandSet, RidgeModel, full_band, ridge_bands
from rrpridge.signal import snr_db
from rrpridge.tfr import istft
from tests.conftest import LENGTH, N_BINS, SIGMA, interior


def chirp_model() -> RidgeModel:
    # IF 100 + 200 t Hz is 50 + 100 t bins
    return RidgeModel(curve=np.polynomial.Polynomial([50.0, 100.0]))


def test_full_band_reconstructs_signal(chirp_analysis, chirp_signal):
    """Test that summing every bin returns the signal exactly."""
    (estimate,) = reconstruct_band(chirp_analysis.grid, full_band(LENGTH, N_BINS))
    np.testing.assert_allclose(estimate.samples, chirp_signal.samples, atol=1e-10)


def test_band_reconstruction_of_chirp(chirp_analysis, chirp_signal):
    """Test that the ±3 std band around the true IF recovers the chirp."""
    bands = ridge_bands([chirp_model()], SIGMA, LENGTH, N_BINS)
    (estimate,) = reconstruct_band(chirp_analysis.grid, bands)
    assert estimate.boundary == 54
    assert snr_db(interior(chirp_signal.samples), interior(estimate.samples)) > 20


def test_empty_band_gives_zero(chirp_analysis):
    """Test that lower > upper contributes nothing."""
    bands = BandSet(
        lower=np.full((1, LENGTH), 10, dtype=np.int64),
        upper=np.full((1, LENGTH), 9, dtype=np.int64),
    )
    (estimate,) = reconstruct_band(chirp_analysis.grid, bands)
    assert not np.any(estimate.samples)


def test_band_length_mismatch_raises(chirp_analysis):
    """Test that bands must span the grid."""
    with pytest.raises(ConfigError):
        reconstruct_band(chirp_analysis.grid, full_band(LENGTH - 1, N_BINS))


def test_lcr_reconstructs_tone(tone_analysis, tone_signal):
    """Test that the Gaussian profile at the tone bin restores the tone."""
    model = RidgeModel(curve=np.polynomial.Polynomial([100.0]))
    (estimate,) = reconstruct_lcr(tone_analysis.grid, [model], SIGMA)
    assert snr_db(interior(tone_signal.samples), interior(estimate.samples)) > 30


def test_lcr_reconstructs_linear_chirp(chirp_analysis, chirp_signal):
    """Test linear-chirp resynthesis with the exact ridge."""
    (estimate,) = reconstruct_lcr(chirp_analysis.grid, [chirp_model()], SIGMA)
    assert snr_db(interior(chirp_signal.samples), interior(estimate.samples)) > 20


def test_lcr_grid_sums_to_lcr_estimate(chirp_analysis):
    """Test that the denoised STFT inverts to the resynthesized mode."""
    denoised = lcr_grid(chirp_analysis.grid, [chirp_model()], SIGMA)
    (estimate,) = reconstruct_lcr(chirp_analysis.grid, [chirp_model()], SIGMA)
    np.testing.assert_allclose(istft(denoised).samples, estimate.samples, atol=1e-9)
    assert denoised.values.shape == chirp_analysis.grid.values.shape


def test_classic_reconstruction_of_two_tones(two_tone_analysis, two_tone_modes):
    """Test S-MR on both tones of a noiseless mixture."""
    ridges = detect_srd(two_tone_analysis.grid, 2, 10.0, 100.0)
    estimates = reconstruct_classic(
        two_tone_analysis.grid, ridges, two_tone_analysis.qhat, SIGMA
    )
    assert len(estimates) == 2
    for ridge, estimate in zip(ridges, estimates, strict=True):
        mode = two_tone_modes[0] if np.median(ridge.phi) < 100 else two_tone_modes[1]
        truth = mode.sample(LENGTH)
        assert snr_db(interior(truth), interior(estimate.samples)) > 20


def test_classic_bands_are_disjoint(two_tone_analysis):
    """Test that classic bands of two ridges never overlap."""
    ridges = detect_srd(two_tone_analysis.grid, 2, 10.0, 100.0)
    bands = classic_bands(two_tone_analysis.grid, ridges, two_tone_analysis.qhat, SIGMA)
    low, high = sorted(range(2), key=lambda p: bands.lower[p, 0])
    assert np.all(bands.upper[low] < bands.lower[high])


def test_estimates_frame_flags_boundary(chirp_analysis):
    """Test the mode export columns and boundary flags."""
    estimates = reconstruct_band(chirp_analysis.grid, full_band(LENGTH, N_BINS))
    frame = estimates_frame(estimates)
    assert list(frame.columns) == ["mode", "n", "real", "imag", "boundary"]
    assert int(frame["boundary"].sum()) == 2 * 54
    assert estimates_frame([]).empty
