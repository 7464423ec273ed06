"""
rrpridge CLI - run the benchmark, the demonstration or the GW pipeline.
"""

import argparse
import json
import sys
from collections.abc import Sequence
from typing import Any

from loguru import logger

from rrpridge.core.base_experiment import BaseExperiment
from rrpridge.core.errors import RidgeError
from rrpridge.core.logger import init_logger, log_error
from rrpridge.experiments.bench.experiment import BenchExperiment
from rrpridge.experiments.demo.experiment import DemoExperiment
from rrpridge.experiments.gw.experiment import GwExperiment

EXPERIMENTS: dict[str, type[BaseExperiment]] = {
    "bench": BenchExperiment,
    "demo": DemoExperiment,
    "gw": GwExperiment,
}


def _split_list(values: list[str] | None) -> list[str] | None:
    """Flatten repeated and comma-separated flag values."""
    if not values:
        return None
    parts = (part.strip() for value in values for part in value.split(","))
    return [part for part in parts if part]


def _sigma(value: str) -> float | str:
    if value == "renyi":
        return value
    try:
        return float(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(
            f"--sigma takes a number or 'renyi', got {value!r}"
        ) from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rrpridge",
        description="Ridge detection and mode retrieval with relevant ridge portions",
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="User TOML config file")
    common.add_argument(
        "--snr",
        action="append",
        help="Input SNR in dB (repeatable or comma list, e.g. --snr=-10,-5)",
    )
    common.add_argument("--runs", type=int, help="Noise realizations per SNR point")
    common.add_argument("--seed", type=int, help="Base noise seed")
    common.add_argument(
        "--method",
        action="append",
        help="Detector or reconstructor (repeatable or comma list)",
    )
    common.add_argument("--out", help="Output directory")
    common.add_argument("--tol", type=float, help="Spline tolerance in bins")
    common.add_argument("--sigma", type=_sigma, help="Window scale or 'renyi'")
    common.add_argument("--preset", help="Signal preset name")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument(
        "--log-file",
        action="store_true",
        help="Also write a JSON-lines run log into the output directory",
    )

    subparsers.add_parser(
        "bench", parents=[common], help="Output SNR versus input SNR benchmark"
    )
    subparsers.add_parser(
        "demo", parents=[common], help="One realization with every intermediate CSV"
    )
    gw_parser = subparsers.add_parser(
        "gw", parents=[common], help="Spline RRP pipeline on a strain file"
    )
    gw_parser.add_argument("--strain", help="Strain file (1 or 2 columns)")
    gw_parser.add_argument("--nr", help="Numerical-relativity waveform file")
    return parser


def overrides_from_args(args: argparse.Namespace) -> dict[str, Any]:
    """Map parsed flags to dotted settings keys; unset flags are dropped."""
    snr = _split_list(args.snr)
    overrides = {
        "bench.snr": [float(s) for s in snr] if snr else None,
        "bench.runs": args.runs,
        "bench.seed": args.seed,
        "bench.methods": _split_list(args.method),
        "bench.out_dir": args.out,
        "fit.tol_bins": args.tol,
        "analysis.sigma": args.sigma,
        "signal.preset": args.preset,
        "gw.strain": getattr(args, "strain", None),
        "gw.nr": getattr(args, "nr", None),
    }
    return {key: value for key, value in overrides.items() if value is not None}


def log_overrides_from_args(args: argparse.Namespace) -> dict[str, Any]:
    """Logging keys set by --log-level and --log-file."""
    overrides: dict[str, Any] = {}
    if args.log_level:
        overrides["logging.level"] = args.log_level.upper()
    if args.log_file:
        overrides["logging.file_enabled"] = True
    return overrides


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return 1

    try:
        overrides = overrides_from_args(args)
    except ValueError as e:
        print(f"Error: invalid --snr value: {e}", file=sys.stderr)
        return 1

    log_overrides = log_overrides_from_args(args)
    try:
        init_logger(args.command, args.config, **overrides, **log_overrides)
        experiment = EXPERIMENTS[args.command](args.config, **overrides)
        summary = experiment.run()
    except RidgeError as e:
        log_error(e, f"{args.command} failed")
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        logger.warning("Interrupted by user")
        return 130

    print(json.dumps(summary, indent=2, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
