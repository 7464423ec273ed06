"""
Peeling ridge detectors.

S-RD bounds the per-step frequency jump by the modulation bound B_f;
MB-RD steers each step with the chirp-rate estimate q̂ and a slack of C
bins. Both extract one ridge at a time, keep the initialization with the
largest ridge energy, then zero a band around that ridge and repeat.
"""

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import pandas as pd
from loguru import logger

from rrpridge.core.errors import ConfigError, DetectionError
from rrpridge.tfr import ModulationGrid, TfGrid

# Magnitude marker for zeroed band bins, below any real |V|.
MASKED = -1.0

# (n, phi at n, direction) -> center of the search window at n + direction
StepPredictor = Callable[[int, np.ndarray, int], np.ndarray]


@dataclass(frozen=True)
class Ridge:
    """Integer frequency bin per time index, defined on the whole span."""

    phi: np.ndarray
    energy: float = 0.0
    init_index: int = 0

    @property
    def length(self) -> int:
        return int(self.phi.size)

    def frequencies(self, bin_width: float) -> np.ndarray:
        """Ridge frequency in Hz."""
        return self.phi * bin_width


def init_indices(length: int, half_support: int, count: int) -> np.ndarray:
    """count indices evenly spaced in [M, L-1-M], duplicates dropped."""
    if count < 1:
        raise ConfigError(f"init_count must be at least 1, got {count}")
    lo, hi = half_support, length - 1 - half_support
    if hi < lo:
        lo = hi = length // 2
    return np.unique(np.round(np.linspace(lo, hi, count)).astype(np.int64))


def band_half_width(delta: float, length: int, n_bins: int) -> int:
    """Peeling band half-width ⌈ΔN/L⌉ in bins."""
    return math.ceil(delta * n_bins / length)


def detect_srd(
    grid: TfGrid,
    modes: int,
    modulation_bound: float,
    delta: float,
    init_count: int = 16,
) -> list[Ridge]:
    """
    Simple ridge detection with a fixed per-step bound of ⌈N·B_f/L²⌉ bins.

    Raises:
        ConfigError: on P < 1 or B_f <= 0
        DetectionError: when P peeled bands would cover the whole spectrum
    """
    if modulation_bound <= 0:
        raise ConfigError(f"Modulation bound must be positive, got {modulation_bound}")
    reach = math.ceil(grid.n_bins * modulation_bound / grid.length**2)

    def predict(n: int, phi: np.ndarray, direction: int) -> np.ndarray:
        return phi

    return _peel(grid, modes, delta, init_count, predict, reach, "S-RD")


def detect_mbrd(
    grid: TfGrid,
    qhat: ModulationGrid,
    modes: int,
    slack: int,
    delta: float,
    init_count: int = 16,
) -> list[Ridge]:
    """
    Modulation-based ridge detection.

    The step n -> n+1 searches [φ[n] + ⌈q̂[n, φ[n]]·N/L²⌋ - C, ... + C]. The
    backward pass uses the mirrored prediction φ[n] - ⌈q̂·N/L²⌋.
    """
    if slack < 0:
        raise ConfigError(f"Slack C must be non-negative, got {slack}")
    if qhat.q_hat.shape != grid.values.shape:
        raise ConfigError("Modulation grid and STFT grid shapes differ")
    steps = qhat.steps(grid.length, grid.n_bins)

    def predict(n: int, phi: np.ndarray, direction: int) -> np.ndarray:
        return phi + direction * steps[n, phi]

    return _peel(grid, modes, delta, init_count, predict, slack, "MB-RD")


def _peel(
    grid: TfGrid,
    modes: int,
    delta: float,
    init_count: int,
    predict: StepPredictor,
    reach: int,
    label: str,
) -> list[Ridge]:
    if modes < 1:
        raise ConfigError(f"Number of modes must be at least 1, got {modes}")
    half_width = band_half_width(delta, grid.length, grid.n_bins)
    if modes * (2 * half_width + 1) >= grid.n_bins:
        raise DetectionError(
            f"{label}: {modes} bands of {2 * half_width + 1} bins leave no spectrum "
            f"in N={grid.n_bins}"
        )

    magnitude = grid.magnitude()
    power = magnitude**2
    inits = init_indices(grid.length, grid.window.half_support, init_count)
    rows = np.arange(grid.length)

    ridges: list[Ridge] = []
    for mode in range(modes):
        paths = _track(magnitude, inits, predict, reach)
        energies = power[rows[None, :], paths].sum(axis=1)
        best = int(np.argmax(energies))
        ridge = Ridge(
            phi=paths[best].copy(),
            energy=float(energies[best]),
            init_index=int(inits[best]),
        )
        ridges.append(ridge)
        logger.debug(
            f"{label} ridge extracted",
            mode=mode,
            energy=ridge.energy,
            init_index=ridge.init_index,
        )

        lo = np.clip(ridge.phi - half_width, 0, grid.n_bins - 1)
        hi = np.clip(ridge.phi + half_width, 0, grid.n_bins - 1)
        bins = np.arange(grid.n_bins)
        band = (bins[None, :] >= lo[:, None]) & (bins[None, :] <= hi[:, None])
        magnitude = np.where(band, MASKED, magnitude)
        power = np.where(band, 0.0, power)

    return ridges


def _track(
    magnitude: np.ndarray, inits: np.ndarray, predict: StepPredictor, reach: int
) -> np.ndarray:
    """Grow one path per init index, forward then backward, all at once."""
    length, n_bins = magnitude.shape
    offsets = np.arange(-reach, reach + 1)
    paths = np.zeros((inits.size, length), dtype=np.int64)
    paths[np.arange(inits.size), inits] = np.argmax(magnitude[inits], axis=1)

    def step(n: int, active: np.ndarray, direction: int) -> None:
        previous = paths[active, n]
        center = predict(n, previous, direction)
        window = np.clip(center[:, None] + offsets[None, :], 0, n_bins - 1)
        values = magnitude[n + direction, window]
        # clipped duplicates sit at the window edges, so argmax still favours
        # the lowest bin on ties
        choice = np.argmax(values, axis=1)
        picked = window[np.arange(window.shape[0]), choice]
        # a window lying entirely in a peeled band holds the path in place
        blocked = values.max(axis=1) <= MASKED
        paths[active, n + direction] = np.where(blocked, previous, picked)

    for n in range(int(inits.min()), length - 1):
        step(n, np.flatnonzero(inits <= n), 1)
    for n in range(int(inits.max()), 0, -1):
        step(n, np.flatnonzero(inits >= n), -1)
    return paths


def ridges_frame(ridges: list[Ridge], bin_width: float) -> pd.DataFrame:
    """Long-format table with columns mode, n, bin, frequency_hz."""
    frames = [
        pd.DataFrame(
            {
                "mode": mode,
                "n": np.arange(ridge.length),
                "bin": ridge.phi,
                "frequency_hz": ridge.frequencies(bin_width),
            }
        )
        for mode, ridge in enumerate(ridges)
    ]
    if not frames:
        return pd.DataFrame(columns=["mode", "n", "bin", "frequency_hz"])
    return pd.concat(frames, ignore_index=True)
