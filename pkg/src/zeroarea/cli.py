"""Command line entry point: ``zeroarea run CONFIG [--override k=v] [--out DIR]``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .config import ConfigError, load_config
from .experiments import run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONTRACT = 3

log = logging.getLogger("zeroarea")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zeroarea",
        description="Zero-area constrained optimal and local quantum control experiments.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("config", help="sectioned key = value configuration file")
    run.add_argument(
        "--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
        help="override one config entry (repeatable)",
    )
    run.add_argument("--out", help="output directory (overrides [run] out_dir)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config, args.override)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    summary = run_experiment(cfg)
    if not summary.get("monotonic", True):
        print("contract violation: the controlled functional decreased "
              "(time step too large or penalty weight too small)", file=sys.stderr)
        return EXIT_CONTRACT
    log.info("wrote results to %s", cfg.out_dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
