#!/usr/bin/env python3
"""
URVFL Simulator - Command-line entry point

    python main.py run configs/urvfl_mixture.yaml
    python main.py sweep configs/urvfl_mixture.yaml --axis defense.noise_sigma --values 0 0.1 0.3
    python main.py report results/

Exit codes: 0 success, 2 configuration error, 3 any other failure.
"""

import argparse
import logging
import os
import sys

import yaml

# Add the current directory to Python path for imports
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from src.errors import ConfigError
from src.export import write_summary
from src.harness import load_config, run_all, sweep
from src.log_config import configure_logging

logger = logging.getLogger("src.main")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAILURE = 3


def parse_values(tokens: list) -> list:
    """YAML-typed values; a bare comma list such as 0,0.5,1 is split."""
    values = []
    for token in tokens:
        parsed = yaml.safe_load(token)
        if isinstance(parsed, str) and "," in parsed:
            values += [yaml.safe_load(part) for part in parsed.split(",") if part.strip()]
        else:
            values.append(parsed)
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="urvfl", description="Desk-scale VFL attack/defense simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("--log-file", help="also write logs to this file")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every seed of one configuration")
    run.add_argument("config")
    run.add_argument("--output-dir", help="overrides output_dir and URVFL_OUTPUT_DIR")
    run.add_argument("--workers", type=int, default=1)

    sw = sub.add_parser("sweep", help="cross values of one config path with the seeds")
    sw.add_argument("config")
    sw.add_argument("--axis", required=True, help="dotted config path, e.g. defense.nopeek_alpha")
    sw.add_argument("--values", required=True, nargs="+")
    sw.add_argument("--output-dir")
    sw.add_argument("--workers", type=int, default=1)

    rep = sub.add_parser("report", help="aggregate results.db into summary.csv and summary.pdf")
    rep.add_argument("directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging("DEBUG" if args.verbose else None, args.log_file)
    try:
        if args.command == "run":
            config = load_config(args.config)
            reports = run_all(config, args.output_dir, args.workers)
            logger.info("%d run(s) finished", len(reports))
        elif args.command == "sweep":
            config = load_config(args.config)
            reports = sweep(config, args.axis, parse_values(args.values), args.output_dir, args.workers)
            logger.info("%d run(s) finished", len(reports))
        else:
            written = write_summary(args.directory)
            logger.info("Wrote %s", ", ".join(written.values()))
    except ConfigError as e:
        for message in e.errors:
            logger.error("config: %s", message)
        return EXIT_CONFIG
    except Exception as e:
        logger.error("%s: %s", type(e).__name__, e)
        logger.debug("Traceback", exc_info=True)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
