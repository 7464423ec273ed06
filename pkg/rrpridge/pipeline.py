"""
Glue between the algorithm modules: one analysis of a signal, then any of
the detectors and reconstructors run on it, with IF and signal scoring.
"""

from dataclasses import dataclass

import numpy as np

from rrpridge.classic_rd import Ridge, detect_mbrd, detect_srd
from rrpridge.core.base_experiment import ExperimentConfig
from rrpridge.core.errors import DetectionError
from rrpridge.retrieve import (
    ModeEstimate,
    reconstruct_band,
    reconstruct_classic,
    reconstruct_lcr,
)
from rrpridge.ridge_fit import RidgeFit, fit_polynomial_ridges, fit_spline_ridge
from rrpridge.rrp_extract import (
    RidgeGroup,
    RidgePortion,
    SlcGrid,
    compute_slc,
    extract_rrps,
    gather,
)
from rrpridge.signal import ModeSpec, Signal, snr_db
from rrpridge.tfr import (
    ModulationGrid,
    TfGrid,
    WindowSet,
    make_windows,
    modulation_estimate,
    select_sigma_renyi,
    stft,
)


@dataclass(frozen=True)
class Analysis:
    """STFT, chirp-rate estimate and S_LC of one signal."""

    signal: Signal
    sigma: float
    window: WindowSet
    grid: TfGrid
    qhat: ModulationGrid
    slc: SlcGrid

    @property
    def boundary(self) -> int:
        return self.window.half_support


@dataclass(frozen=True)
class RrpResult:
    rrps: list[RidgePortion]
    groups: list[RidgeGroup]
    fit: RidgeFit


def resolve_sigma(clean: Signal, config: ExperimentConfig) -> float:
    """Configured σ, or the Rényi choice among the candidates."""
    if isinstance(config.sigma, str):
        return select_sigma_renyi(
            clean, config.sigma_candidates, config.n_bins, config.renyi_order
        )
    return float(config.sigma)


def analyze(
    f: Signal, sigma: float, n_bins: int, max_chirp_rate: float | None = None
) -> Analysis:
    window = make_windows(sigma, f.length, n_bins)
    grid = stft(f, window, n_bins)
    qhat = modulation_estimate(f, window, n_bins)
    return Analysis(
        signal=f,
        sigma=sigma,
        window=window,
        grid=grid,
        qhat=qhat,
        slc=compute_slc(grid, qhat, sigma, max_chirp_rate),
    )


def run_srd(analysis: Analysis, config: ExperimentConfig) -> list[Ridge]:
    return detect_srd(
        analysis.grid,
        config.modes,
        config.modulation_bound,
        config.separation,
        config.init_count,
    )


def run_mbrd(analysis: Analysis, config: ExperimentConfig) -> list[Ridge]:
    return detect_mbrd(
        analysis.grid,
        analysis.qhat,
        config.modes,
        config.slack,
        config.separation,
        config.init_count,
    )


def run_rrp(
    analysis: Analysis,
    config: ExperimentConfig,
    spline: bool = False,
    modes: int | None = None,
) -> RrpResult:
    """RRPs, groups and the ridge fit (polynomial, or spline for one mode)."""
    modes = modes or config.modes
    rrps = extract_rrps(
        analysis.slc, analysis.qhat, modes, config.scale, config.init_stride
    )
    groups = gather(rrps, analysis.slc, analysis.sigma, config.delta_t)
    if not groups:
        raise DetectionError("No relevant ridge portion survived the scale test")
    if spline:
        fit = fit_spline_ridge(
            groups,
            analysis.slc,
            config.tol_bins,
            analysis.sigma,
            config.literal_chirp_rate,
        )
    else:
        fit = fit_polynomial_ridges(
            groups,
            analysis.slc,
            modes,
            config.degree,
            analysis.sigma,
            config.literal_chirp_rate,
        )
    return RrpResult(rrps=rrps, groups=groups, fit=fit)


def ridge_frequencies(ridges: list[Ridge], analysis: Analysis) -> np.ndarray:
    """P x L IF estimates in Hz from peeling ridges."""
    return np.stack([r.frequencies(analysis.grid.bin_width) for r in ridges])


def fit_frequencies(fit: RidgeFit, analysis: Analysis) -> np.ndarray:
    """P x L IF estimates in Hz from fitted models."""
    length, n_bins = analysis.grid.length, analysis.grid.n_bins
    return np.stack([m.frequency_hz(length, n_bins) for m in fit.models])


def reconstruct(
    method: str,
    analysis: Analysis,
    ridges: list[Ridge] | None = None,
    fit: RidgeFit | None = None,
) -> list[ModeEstimate]:
    """Run one reconstructor given the matching detector output."""
    if method in ("S-MR", "MB-MR"):
        if ridges is None:
            raise DetectionError(f"{method} needs peeling ridges")
        return reconstruct_classic(analysis.grid, ridges, analysis.qhat, analysis.sigma)
    if fit is None:
        raise DetectionError(f"{method} needs a ridge fit")
    if method == "RRP-MR":
        return reconstruct_band(analysis.grid, fit.bands)
    return reconstruct_lcr(analysis.grid, fit.models, analysis.sigma)


def match_modes(estimates: np.ndarray, truths: np.ndarray) -> list[int]:
    """
    Truth index for each estimate row, pairing by rank of mean frequency.

    Works with fewer estimates than truths: the estimate at rank r pairs
    with the truth whose mean frequency is closest among those still free.
    """
    truth_means = truths.mean(axis=1)
    order = np.argsort(estimates.mean(axis=1), kind="stable")
    if estimates.shape[0] == truths.shape[0]:
        pairing = np.empty(estimates.shape[0], dtype=np.int64)
        pairing[order] = np.argsort(truth_means, kind="stable")
        return pairing.tolist()
    free = list(range(truths.shape[0]))
    pairing = np.empty(estimates.shape[0], dtype=np.int64)
    for row in order:
        mean = estimates[row].mean()
        best = min(free, key=lambda t: abs(truth_means[t] - mean))
        pairing[row] = best
        free.remove(best)
    return pairing.tolist()


def if_truth(modes: list[ModeSpec], length: int) -> np.ndarray:
    return np.stack([mode.sampled_if(length) for mode in modes])


def trimmed_snr(reference: np.ndarray, estimate: np.ndarray, boundary: int) -> float:
    """snr_db on [boundary, L - boundary), or the full span if that is empty."""
    length = reference.shape[-1]
    if 2 * boundary >= length:
        return snr_db(reference, estimate)
    interior = slice(boundary, length - boundary)
    return snr_db(reference[interior], estimate[interior])
