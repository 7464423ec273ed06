"""
Base experiment class that all rrpridge experiments inherit from.
Provides settings loading, configuration validation, logging and result storage.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from rrpridge.core.errors import ConfigError
from rrpridge.core.logger import log_event
from rrpridge.core.results import ResultStore
from rrpridge.core.settings import (
    ALL_METHODS,
    DETECTORS,
    RECONSTRUCTORS,
    get_setting,
    load_settings,
)
from rrpridge.signal import PRESETS


def _optional_float(value: Any) -> float | None:
    return None if value is None else float(value)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated parameters of one experiment run."""

    preset: str = "two_linear"
    preset_params: dict[str, float] = field(default_factory=dict)
    length: int = 4096
    modes: int = 2
    n_bins: int = 512
    sigma: float | str = "renyi"
    sigma_candidates: tuple[float, ...] = (0.01, 0.015, 0.02, 0.025, 0.0275)
    renyi_order: float = 3.0
    max_chirp_rate: float | None = None
    modulation_bound: float = 10.0
    slack: int = 2
    separation: float = 100.0
    init_count: int = 16
    scale: int = 8
    init_stride: int = 1
    delta_t: int = 20
    degree: int = 5
    tol_bins: float = 3.0
    literal_chirp_rate: bool = False
    snr_grid: tuple[float, ...] = (-10.0, -8.0, -6.0, -4.0, -2.0, 0.0, 2.0, 4.0)
    runs: int = 30
    seed: int = 0
    methods: tuple[str, ...] = ALL_METHODS
    out_dir: str = "results"
    strain_path: str | None = None
    nr_path: str | None = None

    @property
    def detectors(self) -> tuple[str, ...]:
        return tuple(m for m in self.methods if m in DETECTORS)

    @property
    def reconstructors(self) -> tuple[str, ...]:
        return tuple(m for m in self.methods if m in RECONSTRUCTORS)

    @classmethod
    def from_settings(cls, settings: dict[str, Any]) -> "ExperimentConfig":
        """
        Build and validate a config from a merged settings dictionary.

        Raises:
            ConfigError: on any out-of-range value or unknown name
        """

        def get(key: str, default: Any) -> Any:
            return get_setting(settings, key, default)

        try:
            sigma = get("analysis.sigma", "renyi")
            if not (isinstance(sigma, str) and sigma == "renyi"):
                sigma = float(sigma)
            methods = get("bench.methods", list(ALL_METHODS))
            if isinstance(methods, str):
                methods = [m.strip() for m in methods.split(",") if m.strip()]
            snr = get("bench.snr", [-10.0])
            if isinstance(snr, int | float):
                snr = [snr]
            config = cls(
                preset=str(get("signal.preset", "two_linear")),
                preset_params={
                    str(k): float(v) for k, v in get("signal.params", {}).items()
                },
                length=int(get("signal.length", 4096)),
                modes=int(get("detection.modes", 2)),
                n_bins=int(get("analysis.n_bins", 512)),
                sigma=sigma,
                sigma_candidates=tuple(
                    float(s) for s in get("analysis.sigma_candidates", [0.02])
                ),
                renyi_order=float(get("analysis.renyi_order", 3.0)),
                max_chirp_rate=_optional_float(get("analysis.max_chirp_rate", None)),
                modulation_bound=float(get("detection.modulation_bound", 10.0)),
                slack=int(get("detection.slack", 2)),
                separation=float(get("detection.separation", 100.0)),
                init_count=int(get("detection.init_count", 16)),
                scale=int(get("rrp.scale", 8)),
                init_stride=int(get("rrp.init_stride", 1)),
                delta_t=int(get("rrp.delta_t", 20)),
                degree=int(get("fit.degree", 5)),
                tol_bins=float(get("fit.tol_bins", 3.0)),
                literal_chirp_rate=bool(get("fit.literal_chirp_rate", False)),
                snr_grid=tuple(float(s) for s in snr),
                runs=int(get("bench.runs", 30)),
                seed=int(get("bench.seed", 0)),
                methods=tuple(str(m) for m in methods),
                out_dir=str(get("bench.out_dir", "results")),
                strain_path=get("gw.strain", None),
                nr_path=get("gw.nr", None),
            )
        except (TypeError, ValueError, AttributeError) as e:
            raise ConfigError(f"Invalid setting value: {e}") from e
        config.validate()
        return config

    def validate(self) -> None:
        """Range checks; raises ConfigError on the first violation."""
        checks = [
            (self.preset in PRESETS, f"unknown preset {self.preset!r}"),
            (self.length >= 2, "signal.length must be >= 2"),
            (self.modes >= 1, "detection.modes must be >= 1"),
            (self.n_bins >= 3, "analysis.n_bins must be >= 3"),
            (
                isinstance(self.sigma, str) or self.sigma > 0,
                "analysis.sigma must be > 0",
            ),
            (len(self.sigma_candidates) > 0, "analysis.sigma_candidates is empty"),
            (all(s > 0 for s in self.sigma_candidates), "sigma candidates must be > 0"),
            (
                self.max_chirp_rate is None or self.max_chirp_rate > 0,
                "analysis.max_chirp_rate must be > 0",
            ),
            (self.modulation_bound > 0, "detection.modulation_bound must be > 0"),
            (self.slack >= 0, "detection.slack must be >= 0"),
            (self.separation >= 0, "detection.separation must be >= 0"),
            (self.init_count >= 1, "detection.init_count must be >= 1"),
            (self.scale >= 1, "rrp.scale must be >= 1"),
            (self.init_stride >= 1, "rrp.init_stride must be >= 1"),
            (self.delta_t >= 0, "rrp.delta_t must be >= 0"),
            (self.degree >= 1, "fit.degree must be >= 1"),
            (self.tol_bins > 0, "fit.tol_bins must be > 0"),
            (len(self.snr_grid) > 0, "bench.snr is empty"),
            (not any(math.isnan(s) for s in self.snr_grid), "bench.snr contains NaN"),
            (self.runs >= 1, "bench.runs must be >= 1"),
            (len(self.methods) > 0, "bench.methods is empty"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        unknown = sorted(set(self.methods) - set(ALL_METHODS))
        if unknown:
            raise ConfigError(
                f"Unknown methods {unknown}; choose from {list(ALL_METHODS)}"
            )
        if isinstance(self.sigma, str) and self.sigma != "renyi":
            raise ConfigError(
                f"analysis.sigma must be a number or 'renyi', got {self.sigma!r}"
            )


class BaseExperiment(ABC):
    """
    Base class for rrpridge experiments.

    Provides:
    - Hierarchical settings (defaults, global, experiment, --config, flags)
    - A validated ExperimentConfig
    - A ResultStore on the output directory
    """

    def __init__(
        self,
        experiment_name: str,
        config_path: str | Path | None = None,
        **overrides: Any,
    ):
        """
        Initialize the experiment.

        Args:
            experiment_name: Name of the experiment package for settings loading
            config_path: Optional user TOML config file
            **overrides: Dotted-key overrides, e.g. ``**{"bench.runs": 3}``
        """
        self.experiment_name = experiment_name
        self.settings = load_settings(experiment_name, config_path, **overrides)
        self.config = ExperimentConfig.from_settings(self.settings)
        self.store = ResultStore(self.config.out_dir)

        log_event(
            "experiment_initialized",
            experiment=experiment_name,
            preset=self.config.preset,
            methods=list(self.config.methods),
            out_dir=self.config.out_dir,
        )

    @abstractmethod
    def run(self) -> dict[str, Any]:
        """Run the experiment and return a summary of what was written."""
