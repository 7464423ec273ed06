"""
Exception hierarchy for rrpridge.

Every class carries the process exit code the CLI uses when the error
escapes a subcommand.
"""


class RidgeError(Exception):
    """Base class for all rrpridge errors."""

    exit_code = 1


class ConfigError(RidgeError, ValueError):
    """Invalid settings, flags or algorithm parameters."""

    exit_code = 1


class SignalError(RidgeError, ValueError):
    """Invalid signal content (crossing modes, zero reference, length mismatch)."""

    exit_code = 2


class DataError(RidgeError):
    """Unreadable, empty or too short input data files."""

    exit_code = 2


class DetectionError(RidgeError):
    """A detector could not produce ridges."""

    exit_code = 3
