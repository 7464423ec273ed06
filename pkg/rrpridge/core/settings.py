"""
Settings management for rrpridge experiments.

Handles hierarchical settings loading with priority:
1. Flag / constructor overrides (highest)
2. User config file (--config)
3. Experiment-specific settings
4. Global settings
5. Default values (lowest)
"""

from pathlib import Path
from typing import Any

import tomli

from rrpridge.core.errors import ConfigError

PACKAGE_ROOT = Path(__file__).resolve().parent.parent

DETECTORS = ("S-RD", "MB-RD", "RRP-RD")
RECONSTRUCTORS = ("S-MR", "MB-MR", "RRP-MR", "RRP-MR-LCR")
ALL_METHODS = DETECTORS + RECONSTRUCTORS


def get_default_settings() -> dict[str, Any]:
    """Get hardcoded default settings."""
    return {
        "signal": {
            "preset": "two_linear",
            "length": 4096,
        },
        "analysis": {
            "n_bins": 512,
            "sigma": "renyi",
            "sigma_candidates": [0.01, 0.015, 0.02, 0.025, 0.0275],
            "renyi_order": 3.0,
        },
        "detection": {
            "modes": 2,
            "modulation_bound": 10.0,
            "slack": 2,
            "separation": 100.0,
            "init_count": 16,
        },
        "rrp": {
            "scale": 8,
            "init_stride": 1,
            "delta_t": 20,
        },
        "fit": {
            "degree": 5,
            "tol_bins": 3.0,
            "literal_chirp_rate": False,
        },
        "bench": {
            "snr": [-10.0, -8.0, -6.0, -4.0, -2.0, 0.0, 2.0, 4.0],
            "runs": 30,
            "seed": 0,
            "methods": list(ALL_METHODS),
            "out_dir": "results",
        },
        "logging": {
            "level": "INFO",
            "console_enabled": True,
            "file_enabled": False,
            "format": "human",
        },
    }


def load_toml_file(file_path: str | Path, required: bool = False) -> dict[str, Any]:
    """
    Load TOML file safely.

    Built-in layers are optional and return an empty dict when missing or
    malformed; a required file (the user --config) raises ConfigError instead.
    """
    try:
        with open(file_path, "rb") as f:
            return tomli.load(f)
    except FileNotFoundError as e:
        if required:
            raise ConfigError(f"Config file not found: {file_path}") from e
        return {}
    except tomli.TOMLDecodeError as e:
        if required:
            raise ConfigError(f"Malformed config file {file_path}: {e}") from e
        return {}


def merge_settings(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    """Merge two settings dictionaries recursively."""
    result = base.copy()

    for key, value in override.items():
        if key in result and isinstance(result[key], dict) and isinstance(value, dict):
            result[key] = merge_settings(result[key], value)
        else:
            result[key] = value

    return result


def nest_overrides(overrides: dict[str, Any]) -> dict[str, Any]:
    """Convert dotted-key overrides ("bench.runs": 3) to a nested dict."""
    nested: dict[str, Any] = {}
    for key_path, value in overrides.items():
        if value is None:
            continue
        parts = key_path.split(".")
        current = nested
        for part in parts[:-1]:
            current = current.setdefault(part, {})
        current[parts[-1]] = value
    return nested


def load_settings(
    experiment_name: str | None = None,
    config_path: str | Path | None = None,
    **overrides: Any,
) -> dict[str, Any]:
    """
    Load settings with hierarchical priority.

    Args:
        experiment_name: Name of the experiment (e.g., "bench")
        config_path: Optional user TOML config file
        **overrides: Dotted-key overrides, e.g. ``**{"bench.runs": 3}``

    Returns:
        Merged settings dictionary
    """
    # 1. Start with defaults
    settings = get_default_settings()

    # 2. Load global settings
    global_settings = load_toml_file(PACKAGE_ROOT / "settings.toml")
    if global_settings:
        settings = merge_settings(settings, global_settings)

    # 3. Load experiment-specific settings
    if experiment_name:
        experiment_path = (
            PACKAGE_ROOT / "experiments" / experiment_name / "settings.toml"
        )
        experiment_settings = load_toml_file(experiment_path)
        if experiment_settings:
            settings = merge_settings(settings, experiment_settings)

    # 4. Load the user config file
    if config_path is not None:
        settings = merge_settings(settings, load_toml_file(config_path, required=True))

    # 5. Apply flag overrides
    if overrides:
        settings = merge_settings(settings, nest_overrides(overrides))

    return settings


def get_setting(settings: dict[str, Any], key_path: str, default: Any = None) -> Any:
    """
    Get setting value using dot notation.

    Args:
        settings: Settings dictionary
        key_path: Dot-separated path (e.g., "detection.modes")
        default: Default value if key not found

    Returns:
        Setting value or default
    """
    keys = key_path.split(".")
    value = settings

    for key in keys:
        if isinstance(value, dict) and key in value:
            value = value[key]
        else:
            return default

    return value
