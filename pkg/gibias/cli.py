# pygibias/gibias/cli.py
# Copyright (C) 2025-2026 The pygibias developers
# SPDX-License-Identifier: LGPL-3.0-or-later

"""
Command-line front end: ``gibias {emt,index-table,simulate,biases,oracle-check}``.

Exit codes: 0 success, 1 invalid configuration, model input or usage, 2 invariant
violation, 3 index resource limit.
"""

import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional

from . import __version__
from .decision import ModelInputError
from .experiments import (
    ConfigError,
    ExperimentConfig,
    InvariantViolation,
    cmd_biases,
    cmd_emt,
    cmd_index_table,
    cmd_oracle_check,
    cmd_simulate,
    load_config,
)
from .gittins import IndexResourceError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVARIANT = 2
EXIT_RESOURCE = 3

logger = logging.getLogger("pygibias.cli")


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0.0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


class UsageParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with the invalid-configuration code."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON configuration file")
    common.add_argument("--seed", type=_seed, metavar="U64", help="base seed (overrides config)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
    common.add_argument("--workers", type=_positive_int, metavar="N",
                        help="trajectory worker threads (overrides config)")
    common.add_argument("--tolerance", type=_positive_float, metavar="FLOAT",
                        help="index tolerance (overrides config)")
    common.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--log-file", metavar="PATH", help="also log to this file")
    common.add_argument("--quiet", action="store_true", help="no progress bars")

    parser = UsageParser(
        prog="gibias",
        description="Rational learning with the Gittins index and the biases it produces.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    sub.add_parser("emt", parents=[common], help="known-risk decision table")
    sub.add_parser("index-table", parents=[common], help="Gittins index lattice table")
    sub.add_parser("simulate", parents=[common], help="run seeded trajectory ensembles")
    sub.add_parser("biases", parents=[common], help="ensembles plus bias reports")
    sub.add_parser("oracle-check", parents=[common], help="brute-force verification")
    return parser


def configure_logging(level: str, log_file: Optional[str] = None) -> None:
    root = logging.getLogger("pygibias")
    root.setLevel(getattr(logging, level))
    formatter = logging.Formatter('%(asctime)s [%(levelname)s] %(message)s')
    if not any(isinstance(h, logging.StreamHandler) and not isinstance(h, logging.FileHandler)
               for h in root.handlers):
        console = logging.StreamHandler(sys.stderr)
        console.setFormatter(logging.Formatter('[%(levelname)s] %(name)s: %(message)s'))
        root.addHandler(console)
    if log_file:
        handler = logging.FileHandler(log_file)
        handler.setFormatter(formatter)
        root.addHandler(handler)


def _print_emt(config: ExperimentConfig) -> None:
    frame = cmd_emt(config)
    for payoffs_id, rows in frame.groupby("payoffs_id", sort=True):
        print(f"payoffs {payoffs_id}: p_c = {rows['critical_probability'].iloc[0]:.6f}")
        for row in rows.itertuples():
            print(f"  p_bad={row.prob_bad:<6g} expected_payoff={row.expected_payoff:<10.6g} {row.action}")


def _print_paths(paths) -> None:
    for path in paths:
        print(path)


COMMANDS: Dict[str, Callable[[ExperimentConfig, bool], None]] = {
    "emt": lambda config, progress: _print_emt(config),
    "index-table": lambda config, progress: _print_paths(cmd_index_table(config)),
    "simulate": lambda config, progress: cmd_simulate(config, progress),
    "biases": lambda config, progress: cmd_biases(config, progress),
    "oracle-check": lambda config, progress: cmd_oracle_check(config, progress),
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level, args.log_file)
    try:
        config = load_config(args.config).with_overrides(
            seed=args.seed, out_dir=args.out, workers=args.workers, tolerance=args.tolerance,
        )
        logger.info("Running %s into %s", args.command, config.out_dir)
        COMMANDS[args.command](config, not args.quiet)
    except (ConfigError, ModelInputError) as e:
        logger.error("Invalid configuration: %s", e)
        return EXIT_CONFIG
    except InvariantViolation as e:
        logger.error("Invariant violation: %s", e)
        return EXIT_INVARIANT
    except IndexResourceError as e:
        logger.error("Resource limit: %s (achieved bound %.3g)", e, e.achieved_bound)
        return EXIT_RESOURCE
    logger.info("Done: %s", args.command)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
