"""
Monte-Carlo benchmark - output SNR versus input SNR.

For every SNR point and noise realization the preset signal is corrupted,
every requested detector is scored on the IF and every requested
reconstructor on the modes. Records go to bench_records.csv and the per
(method, mode, SNR) means over successful runs to bench_summary.csv.
"""

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from rrpridge.classic_rd import Ridge
from rrpridge.core.base_experiment import BaseExperiment, ExperimentConfig
from rrpridge.core.errors import ConfigError, DetectionError
from rrpridge.core.logger import log_error, log_event, log_performance
from rrpridge.pipeline import (
    analyze,
    fit_frequencies,
    if_truth,
    match_modes,
    reconstruct,
    resolve_sigma,
    ridge_frequencies,
    run_mbrd,
    run_rrp,
    run_srd,
    trimmed_snr,
)
from rrpridge.ridge_fit import RidgeFit
from rrpridge.signal import add_noise, preset_modes, snr_db, synthesize
from rrpridge.tfr import make_windows

WORKERS_ENV = "RRPRIDGE_WORKERS"

# Reconstructor -> detector whose output it consumes
SOURCES = {"S-MR": "S-RD", "MB-MR": "MB-RD", "RRP-MR": "RRP-RD", "RRP-MR-LCR": "RRP-RD"}


@dataclass(frozen=True)
class BenchRecord:
    """One (method, mode, SNR point, realization) score."""

    method: str
    kind: str
    mode: int
    input_snr_db: float
    output_snr_db: float
    output_snr_full_db: float
    run: int
    seed: int
    wall_time_s: float
    failed: bool


def realization_seed(seed: int, snr_index: int, run: int) -> int:
    """Noise seed derived from (base seed, SNR index, run)."""
    state = np.random.SeedSequence([seed, snr_index, run]).generate_state(1)
    return int(state[0])


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        workers = int(raw)
    except ValueError as e:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from e
    if workers < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1, got {workers}")
    return workers


def run_realization(
    config: ExperimentConfig, sigma: float, snr_index: int, run: int
) -> list[BenchRecord]:
    """Score every requested method on one noisy realization."""
    modes = preset_modes(config.preset, **config.preset_params)
    config = replace(config, modes=len(modes))
    clean = synthesize(modes, config.length)
    truth_if = if_truth(modes, config.length)
    truth_modes = np.stack([mode.sample(config.length) for mode in modes])
    input_snr = config.snr_grid[snr_index]
    seed = realization_seed(config.seed, snr_index, run)
    noisy = add_noise(clean, input_snr, seed)

    analysis = analyze(noisy, sigma, config.n_bins, config.max_chirp_rate)
    boundary = analysis.boundary
    wanted_detectors = set(config.detectors) | {
        SOURCES[m] for m in config.reconstructors
    }
    records: list[BenchRecord] = []

    def emit(
        method: str, kind: str, scores: dict[int, tuple[float, float]], t: float
    ) -> None:
        for mode in range(len(modes)):
            trimmed, full = scores.get(mode, (float("nan"), float("nan")))
            records.append(
                BenchRecord(
                    method=method,
                    kind=kind,
                    mode=mode,
                    input_snr_db=input_snr,
                    output_snr_db=trimmed,
                    output_snr_full_db=full,
                    run=run,
                    seed=seed,
                    wall_time_s=t,
                    failed=mode not in scores,
                )
            )

    outputs: dict[str, list[Ridge] | RidgeFit | None] = {}
    for detector in ("S-RD", "MB-RD", "RRP-RD"):
        if detector not in wanted_detectors:
            continue
        start = time.perf_counter()
        scores: dict[int, tuple[float, float]] = {}
        try:
            if detector == "RRP-RD":
                fit = run_rrp(analysis, config).fit
                outputs[detector] = fit
                estimates = fit_frequencies(fit, analysis)
            else:
                ridges = (run_srd if detector == "S-RD" else run_mbrd)(analysis, config)
                outputs[detector] = ridges
                estimates = ridge_frequencies(ridges, analysis)
            for row, truth in enumerate(match_modes(estimates, truth_if)):
                scores[truth] = (
                    trimmed_snr(truth_if[truth], estimates[row], boundary),
                    snr_db(truth_if[truth], estimates[row]),
                )
        except DetectionError as e:
            outputs[detector] = None
            log_error(e, f"{detector} failed", input_snr=input_snr, run=run)
        if detector in config.detectors:
            emit(detector, "if", scores, time.perf_counter() - start)

    for method in config.reconstructors:
        start = time.perf_counter()
        scores = {}
        source = outputs.get(SOURCES[method])
        if source is not None:
            if isinstance(source, RidgeFit):
                result = reconstruct(method, analysis, fit=source)
                centers = fit_frequencies(source, analysis)
            else:
                result = reconstruct(method, analysis, ridges=source)
                centers = ridge_frequencies(source, analysis)
            for row, truth in enumerate(match_modes(centers, truth_if)):
                samples = result[row].samples
                scores[truth] = (
                    trimmed_snr(truth_modes[truth], samples, boundary),
                    snr_db(truth_modes[truth], samples),
                )
        emit(method, "signal", scores, time.perf_counter() - start)
    return records


def summarize(records: pd.DataFrame) -> pd.DataFrame:
    """Means over non-failed records per (method, kind, mode, input SNR)."""
    keys = ["method", "kind", "mode", "input_snr_db"]
    ok = records[~records["failed"]]
    means = ok.groupby(keys, sort=True).agg(
        mean_output_snr_db=("output_snr_db", "mean"),
        mean_output_snr_full_db=("output_snr_full_db", "mean"),
        successes=("output_snr_db", "size"),
    )
    failures = records.groupby(keys, sort=True)["failed"].sum().rename("failures")
    summary = means.join(failures, how="right").reset_index()
    summary["successes"] = summary["successes"].fillna(0).astype(int)
    summary["failures"] = summary["failures"].astype(int)
    return summary


class BenchExperiment(BaseExperiment):
    """Output SNR of detectors and reconstructors over an SNR grid."""

    def __init__(self, config_path: str | Path | None = None, **overrides: Any):
        super().__init__("bench", config_path, **overrides)

    def run(self) -> dict[str, Any]:
        config = self.config
        modes = preset_modes(config.preset, **config.preset_params)
        clean = synthesize(modes, config.length)
        sigma = resolve_sigma(clean, config)
        log_event("bench_started", preset=config.preset, sigma=sigma, runs=config.runs)

        tasks = [
            (snr_index, run)
            for snr_index in range(len(config.snr_grid))
            for run in range(config.runs)
        ]
        workers = worker_count()
        start = time.perf_counter()
        if workers == 1:
            batches = [run_realization(config, sigma, i, r) for i, r in tasks]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(run_realization, config, sigma, i, r) for i, r in tasks
                ]
                batches = [future.result() for future in futures]
        log_performance(
            "bench_wall_time", time.perf_counter() - start, "s", workers=workers
        )

        records = pd.DataFrame(
            [asdict(record) for batch in batches for record in batch],
            columns=list(BenchRecord.__dataclass_fields__),
        )
        summary = summarize(records)
        paths = {
            "records_path": self.store.write_table("bench_records", records),
            "summary_path": self.store.write_table("bench_summary", summary),
        }
        self.store.write_report(
            "bench_report",
            {
                "preset": config.preset,
                "sigma": sigma,
                "n_bins": config.n_bins,
                "snr_grid": list(config.snr_grid),
                "runs": config.runs,
                "seed": config.seed,
                "noise_generator": "PCG64",
                "scoring_trim_samples": make_windows(
                    sigma, config.length, config.n_bins
                ).half_support,
            },
        )
        if len(records) and bool(records["failed"].all()):
            raise DetectionError("Every method failed on every realization")
        return {"sigma": sigma, "records_count": len(records), **paths}
