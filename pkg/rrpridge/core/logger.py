"""
Loguru sinks for rrpridge commands.

The console sink writes to stderr (stdout carries the command's JSON
summary). With ``logging.file_enabled`` a JSON-lines run log is written next
to the results, ``<bench.out_dir>/<command>.log`` unless ``logging.file_path``
names another file.
"""

import sys
from pathlib import Path
from typing import Any

from loguru import logger

from rrpridge.core.settings import get_setting, load_settings

CONSOLE_FORMAT = (
    "<green>{time:HH:mm:ss}</green> | "
    "<level>{level: <8}</level> | "
    "<cyan>{name}</cyan> | "
    "<level>{message}</level> {extra}"
)


def run_log_path(settings: dict[str, Any], command: str | None) -> Path:
    """File of the run log for a command and its merged settings."""
    configured = get_setting(settings, "logging.file_path")
    if configured:
        return Path(configured)
    out_dir = get_setting(settings, "bench.out_dir", "results")
    return Path(out_dir) / f"{command or 'rrpridge'}.log"


def init_logger(
    command: str | None = None,
    config_path: str | Path | None = None,
    **overrides: Any,
) -> Path | None:
    """
    Replace the loguru sinks according to the ``[logging]`` settings.

    Args:
        command: CLI command, also the experiment whose settings apply
        config_path: Optional user TOML config file
        **overrides: Dotted-key overrides, the same ones the experiment gets

    Returns:
        The run log file, or None when file logging is off
    """
    settings = load_settings(command, config_path, **overrides)
    logger.remove()

    level = get_setting(settings, "logging.level", "INFO")
    human = get_setting(settings, "logging.format", "human") == "human"
    if get_setting(settings, "logging.console_enabled", True):
        if human:
            logger.add(sys.stderr, format=CONSOLE_FORMAT, level=level, colorize=True)
        else:
            logger.add(sys.stderr, level=level, serialize=True)

    run_log = None
    if get_setting(settings, "logging.file_enabled", False):
        run_log = run_log_path(settings, command)
        run_log.parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            run_log,
            level=level,
            serialize=True,
            rotation=get_setting(settings, "logging.rotation", "10 MB"),
        )

    logger.info(
        "Logging configured",
        command=command,
        level=level,
        run_log=str(run_log) if run_log else None,
    )
    return run_log


def log_event(event: str, **context: Any) -> None:
    """Milestone of a run (experiment started, table written, ...)."""
    logger.bind(event=event, **context).info(event)


def log_performance(metric: str, value: float, unit: str = "", **context: Any) -> None:
    logger.bind(metric=metric, value=value, unit=unit, **context).info(
        f"{metric} = {value:.3f} {unit}".rstrip()
    )


def log_error(error: Exception, context: str = "", **extra_context: Any) -> None:
    """Error with its type and message bound, traceback at DEBUG."""
    logger.bind(
        error_type=type(error).__name__,
        error_message=str(error),
        **extra_context,
    ).error(context or str(error))
    logger.opt(exception=error).debug("Traceback")
