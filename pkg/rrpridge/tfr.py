"""
Short-time Fourier transform with a Gaussian window.

Conventions used throughout the package:
- grids are indexed [n, k], time index first;
- bin k represents frequency k·L/N;
- chirp rates are in Hz per unit normalized time, so one time step moves a
  ridge by q·N/L² bins.

Out-of-range signal samples are treated as zero, which keeps the inverse
transform exact.
"""

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd
import scipy.fft
from loguru import logger
from numpy.lib.stride_tricks import sliding_window_view

from rrpridge.core.errors import ConfigError, SignalError
from rrpridge.signal import Signal

# Window support is cut where g drops below this level.
WINDOW_FLOOR = 1e-6
# q̂ is zeroed where |denominator| < GUARD · median_n(max_k |V[n, k]|²).
MODULATION_GUARD = 1e-6


@dataclass(frozen=True)
class WindowSet:
    """Gaussian window g(t) = exp(-π t²/σ²) and the derivative windows of q̂."""

    sigma: float
    length: int
    half_support: int
    g: np.ndarray
    dg: np.ndarray
    tg: np.ndarray
    d2g: np.ndarray
    tdg: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.arange(-self.half_support, self.half_support + 1) / self.length

    @property
    def center(self) -> float:
        """g[0], the value the inverse transform divides by."""
        return float(self.g[self.half_support])


@dataclass(frozen=True)
class TfGrid:
    """Complex STFT values indexed [n, k] plus the window that produced them."""

    values: np.ndarray
    window: WindowSet

    @property
    def length(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_bins(self) -> int:
        return int(self.values.shape[1])

    @property
    def bin_width(self) -> float:
        """Hz per frequency bin (L/N)."""
        return self.length / self.n_bins

    def frequencies(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.bin_width

    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    def spectrogram(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def with_values(self, values: np.ndarray) -> "TfGrid":
        return TfGrid(values=values, window=self.window)


@dataclass(frozen=True)
class ModulationGrid:
    """Real chirp-rate estimate q̂[n, k] in Hz per unit normalized time."""

    q_hat: np.ndarray

    def steps(self, length: int, n_bins: int) -> np.ndarray:
        """Per-sample ridge displacement in bins, rounded half away from zero."""
        return round_half_away(self.q_hat * n_bins / length**2)


def round_half_away(x: np.ndarray | float) -> np.ndarray:
    """Nearest integer, halves rounded away from zero."""
    arr = np.asarray(x, dtype=float)
    return (np.sign(arr) * np.floor(np.abs(arr) + 0.5)).astype(np.int64)


def required_half_support(sigma: float, length: int) -> int:
    """Smallest M with g[M] < WINDOW_FLOOR."""
    reach = math.sqrt(math.log(1 / WINDOW_FLOOR) / math.pi)
    return math.floor(sigma * length * reach) + 1


def make_windows(sigma: float, length: int, n_bins: int) -> WindowSet:
    """
    Tabulate g, g′, t·g, g″ and t·g′ on indices -M..M (t = n/L).

    The support is clipped to floor((N-1)/2) with a warning when the Gaussian
    needs more room than N allows.
    """
    if sigma <= 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    if n_bins < 3:
        raise ConfigError(f"N must be at least 3, got {n_bins}")
    if length < 2:
        raise ConfigError(f"L must be at least 2, got {length}")

    half_support = required_half_support(sigma, length)
    max_support = (n_bins - 1) // 2
    if half_support > max_support:
        logger.warning(
            "Window support clipped to fit N bins",
            sigma=sigma,
            required=half_support,
            clipped=max_support,
        )
        half_support = max_support

    t = np.arange(-half_support, half_support + 1) / length
    s2 = sigma**2
    g = np.exp(-np.pi * t**2 / s2)
    dg = -2 * np.pi * t / s2 * g
    d2g = (-2 * np.pi / s2 + 4 * np.pi**2 * t**2 / s2**2) * g
    return WindowSet(
        sigma=sigma,
        length=length,
        half_support=half_support,
        g=g,
        dg=dg,
        tg=t * g,
        d2g=d2g,
        tdg=t * dg,
    )


def _frames(samples: np.ndarray, half_support: int) -> np.ndarray:
    """Rows f[m + j], j = -M..M, zero outside the signal."""
    padded = np.pad(samples, half_support)
    return sliding_window_view(padded, 2 * half_support + 1)


def _transform(frames: np.ndarray, taper: np.ndarray, n_bins: int) -> np.ndarray:
    half_support = (taper.size - 1) // 2
    windowed = frames * taper
    buffer = np.zeros((frames.shape[0], n_bins), dtype=np.complex128)
    # j >= 0 at index j, j < 0 wrapped to N + j
    buffer[:, : half_support + 1] = windowed[:, half_support:]
    if half_support:
        buffer[:, n_bins - half_support :] = windowed[:, :half_support]
    return scipy.fft.fft(buffer, axis=1, workers=-1)


def stft(f: Signal, window: WindowSet, n_bins: int) -> TfGrid:
    """V[m, k] = Σ_j f[m + j]·g[j]·exp(-2iπ k j / N), j = -M..M."""
    _check_geometry(f, window, n_bins)
    frames = _frames(f.samples, window.half_support)
    return TfGrid(values=_transform(frames, window.g, n_bins), window=window)


def istft(grid: TfGrid) -> Signal:
    """f[n] = (1/(g[0]·N))·Σ_k V[n, k]."""
    g0 = grid.window.center
    if g0 == 0:
        raise SignalError("Window vanishes at 0; the transform is not invertible")
    return Signal(grid.values.sum(axis=1) / (g0 * grid.n_bins))


def modulation_estimate(f: Signal, window: WindowSet, n_bins: int) -> ModulationGrid:
    """
    Second-order chirp-rate estimate q̂ = Re(q̃) with

        q̃ = (1/2iπ)·(V^{g″}V^g − (V^{g′})²)
             / (V^{tg}V^{g′} − V^{tg′}V^g).

    Entries whose denominator is below the guard are set to zero.
    """
    _check_geometry(f, window, n_bins)
    frames = _frames(f.samples, window.half_support)
    v_g = _transform(frames, window.g, n_bins)
    v_dg = _transform(frames, window.dg, n_bins)
    v_tg = _transform(frames, window.tg, n_bins)
    v_d2g = _transform(frames, window.d2g, n_bins)
    v_tdg = _transform(frames, window.tdg, n_bins)

    numerator = v_d2g * v_g - v_dg**2
    denominator = v_tg * v_dg - v_tdg * v_g

    power = np.abs(v_g) ** 2
    threshold = MODULATION_GUARD * float(np.median(power.max(axis=1)))
    valid = np.abs(denominator) > threshold
    q_hat = np.zeros(power.shape)
    q_hat[valid] = (numerator[valid] / denominator[valid] / (2j * np.pi)).real
    q_hat[~np.isfinite(q_hat)] = 0.0
    return ModulationGrid(q_hat=q_hat)


def renyi_entropy(spectrogram: np.ndarray, order: float = 3.0) -> float:
    """Rényi entropy (bits) of the normalized spectrogram."""
    total = float(spectrogram.sum())
    if total <= 0:
        raise SignalError("Rényi entropy is undefined for an all-zero spectrogram")
    p = spectrogram / total
    if order == 1:
        nz = p[p > 0]
        return float(-(nz * np.log2(nz)).sum())
    return float(np.log2(np.sum(p**order)) / (1 - order))


def select_sigma_renyi(
    f: Signal,
    candidates: Sequence[float] | Iterable[float],
    n_bins: int,
    order: float = 3.0,
) -> float:
    """
    Return the candidate σ whose spectrogram has the lowest Rényi entropy.

    Candidates whose window needs 2M+1 > N are skipped.

    Raises:
        ConfigError: when no candidate is given or none fits N bins
    """
    candidates = list(candidates)
    if not candidates:
        raise ConfigError("select_sigma_renyi needs at least one candidate")
    fitting = [
        s for s in candidates if 2 * required_half_support(s, f.length) + 1 <= n_bins
    ]
    if len(fitting) < len(candidates):
        logger.warning(
            "Skipping window scales too wide for N bins",
            skipped=[s for s in candidates if s not in fitting],
            n_bins=n_bins,
        )
    if not fitting:
        raise ConfigError(f"No sigma candidate fits N={n_bins} at L={f.length}")
    candidates = fitting
    if len(candidates) == 1:
        return float(candidates[0])
    entropies = []
    for sigma in candidates:
        window = make_windows(sigma, f.length, n_bins)
        entropies.append(renyi_entropy(stft(f, window, n_bins).spectrogram(), order))
    best = int(np.argmin(entropies))
    logger.debug("Rényi window selection", candidates=candidates, entropies=entropies)
    return float(candidates[best])


def _check_geometry(f: Signal, window: WindowSet, n_bins: int) -> None:
    if window.length != f.length:
        raise ConfigError(
            f"Window tabulated for L={window.length}, signal has L={f.length}"
        )
    if 2 * window.half_support + 1 > n_bins:
        raise ConfigError("Window support exceeds N bins (need 2M+1 <= N)")


def grid_frame(grid: TfGrid, magnitude_only: bool = False) -> pd.DataFrame:
    """
    Long-format table of a grid, row-major (n outer, k inner).

    Columns are n, k, frequency_hz and either magnitude or real/imag.
    """
    n_idx, k_idx = np.meshgrid(
        np.arange(grid.length), np.arange(grid.n_bins), indexing="ij"
    )
    frame = pd.DataFrame(
        {
            "n": n_idx.ravel(),
            "k": k_idx.ravel(),
            "frequency_hz": k_idx.ravel() * grid.bin_width,
        }
    )
    if magnitude_only:
        frame["magnitude"] = np.abs(grid.values).ravel()
    else:
        frame["real"] = grid.values.real.ravel()
        frame["imag"] = grid.values.imag.ravel()
    return frame
