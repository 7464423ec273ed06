"""
Mode reconstruction from the STFT.

- reconstruct_band: sum the STFT over each mode's band (RRP-MR, and S-MR /
  MB-MR through reconstruct_classic);
- reconstruct_lcr: replace each column by the linear-chirp profile anchored
  at the ridge coefficient, then sum (RRP-MR-LCR).
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd

from rrpridge.classic_rd import Ridge
from rrpridge.core.errors import ConfigError
from rrpridge.ridge_fit import BandSet, RidgeModel, split_overlaps
from rrpridge.rrp_extract import local_std_hz
from rrpridge.signal import Signal
from rrpridge.tfr import ModulationGrid, TfGrid, round_half_away

# Linear-chirp columns are cut where the Gaussian factor falls below this.
LCR_FLOOR = 1e-8


@dataclass(frozen=True)
class ModeEstimate:
    """One reconstructed mode; the outer `boundary` samples are edge-affected."""

    samples: np.ndarray
    mode: int = 0
    boundary: int = 0

    @property
    def length(self) -> int:
        return int(self.samples.size)

    def interior(self) -> slice:
        return slice(self.boundary, self.length - self.boundary)

    def signal(self) -> Signal:
        return Signal(self.samples)


def reconstruct_band(grid: TfGrid, bands: BandSet) -> list[ModeEstimate]:
    """f_p[n] = (1/(g[0]·N))·Σ V[n, k] over k in [F⁻_p[n], F⁺_p[n]]."""
    if bands.length != grid.length:
        raise ConfigError(f"Bands span {bands.length} samples, grid has {grid.length}")
    cumulative = np.zeros((grid.length, grid.n_bins + 1), dtype=np.complex128)
    np.cumsum(grid.values, axis=1, out=cumulative[:, 1:])
    rows = np.arange(grid.length)
    scale = grid.window.center * grid.n_bins

    estimates = []
    for p in range(bands.modes):
        lower = np.clip(bands.lower[p], 0, grid.n_bins - 1)
        upper = np.clip(bands.upper[p], 0, grid.n_bins - 1)
        total = cumulative[rows, upper + 1] - cumulative[rows, lower]
        total = np.where(bands.lower[p] <= bands.upper[p], total, 0.0)
        estimates.append(
            ModeEstimate(
                samples=total / scale, mode=p, boundary=grid.window.half_support
            )
        )
    return estimates


def _lcr_columns(
    grid: TfGrid, model: RidgeModel, sigma: float
) -> tuple[np.ndarray, np.ndarray]:
    """
    Linear-chirp column of one mode around its ridge.

    Returns (bins, values), both L x (2W+1); bins outside [0, N-1] and
    truncated entries carry value 0.
    """
    length, n_bins = grid.length, grid.n_bins
    width = grid.bin_width
    center = model.bins(length)
    f_ridge = center * width
    rate = model.chirp_rate_hz(length, n_bins)
    k0 = np.clip(round_half_away(center), 0, n_bins - 1)
    anchor = grid.values[np.arange(length), k0]

    factor = (
        math.pi * sigma**2 * (1 + 1j * rate * sigma**2) / (1 + rate**2 * sigma**4)
    )
    # widest support over time where the Gaussian factor can exceed the floor
    spread = math.sqrt(math.log(1 / LCR_FLOOR) / float(np.min(factor.real)))
    offset = float(np.max(np.abs(f_ridge - k0 * width)))
    reach = int(math.ceil((spread + offset) / width)) + 1
    reach = min(reach, n_bins)
    offsets = np.arange(-reach, reach + 1)
    bins = k0[:, None] + offsets[None, :]

    nu0 = (k0 * width)[:, None]
    nu = bins * width
    exponent = factor[:, None] * (nu0 - nu) * (nu0 + nu - 2 * f_ridge[:, None])
    keep = (bins >= 0) & (bins < n_bins) & (exponent.real >= math.log(LCR_FLOOR))
    profile = np.exp(np.where(keep, exponent, 0.0))
    values = np.where(keep, anchor[:, None] * profile, 0.0)
    return bins, values


def lcr_grid(grid: TfGrid, models: Sequence[RidgeModel], sigma: float) -> TfGrid:
    """Denoised STFT: sum over modes of the linear-chirp columns."""
    values = np.zeros_like(grid.values)
    rows = np.arange(grid.length)[:, None]
    for model in models:
        bins, column = _lcr_columns(grid, model, sigma)
        inside = (bins >= 0) & (bins < grid.n_bins)
        np.add.at(
            values,
            (np.broadcast_to(rows, bins.shape)[inside], bins[inside]),
            column[inside],
        )
    return grid.with_values(values)


def reconstruct_lcr(
    grid: TfGrid, models: Sequence[RidgeModel], sigma: float
) -> list[ModeEstimate]:
    """f_p[n] = (1/(g[0]·N))·Σ_k Ṽ_p[n, k] with Ṽ_p the linear-chirp column."""
    scale = grid.window.center * grid.n_bins
    return [
        ModeEstimate(
            samples=_lcr_columns(grid, model, sigma)[1].sum(axis=1) / scale,
            mode=p,
            boundary=grid.window.half_support,
        )
        for p, model in enumerate(models)
    ]


def classic_bands(
    grid: TfGrid, ridges: Sequence[Ridge], qhat: ModulationGrid, sigma: float
) -> BandSet:
    """Bands ±3·std_LC·N/L around each ridge, std from q̂ on the ridge."""
    if not ridges:
        empty = np.empty((0, grid.length), dtype=np.int64)
        return BandSet(lower=empty, upper=empty.copy())
    rows = np.arange(grid.length)
    centers = np.stack([ridge.phi for ridge in ridges]).astype(float)
    rates = np.stack([qhat.q_hat[rows, ridge.phi] for ridge in ridges])
    half = 3 * local_std_hz(rates, sigma) * grid.n_bins / grid.length
    lower = np.clip(np.floor(centers - half), 0, grid.n_bins - 1).astype(np.int64)
    upper = np.clip(np.ceil(centers + half), 0, grid.n_bins - 1).astype(np.int64)
    lower, upper = split_overlaps(lower, upper, centers)
    return BandSet(lower=lower, upper=upper)


def reconstruct_classic(
    grid: TfGrid, ridges: Sequence[Ridge], qhat: ModulationGrid, sigma: float
) -> list[ModeEstimate]:
    """Band summation around S-RD / MB-RD ridges (S-MR, MB-MR)."""
    return reconstruct_band(grid, classic_bands(grid, ridges, qhat, sigma))


def estimates_frame(estimates: Sequence[ModeEstimate]) -> pd.DataFrame:
    """Columns mode, n, real, imag, boundary."""
    frames = []
    for estimate in estimates:
        n = np.arange(estimate.length)
        frames.append(
            pd.DataFrame(
                {
                    "mode": estimate.mode,
                    "n": n,
                    "real": estimate.samples.real,
                    "imag": estimate.samples.imag,
                    "boundary": (n < estimate.boundary)
                    | (n >= estimate.length - estimate.boundary),
                }
            )
        )
    if not frames:
        return pd.DataFrame(columns=["mode", "n", "real", "imag", "boundary"])
    return pd.concat(frames, ignore_index=True)
