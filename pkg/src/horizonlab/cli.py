"""Command-line entry point: ``horizonlab <experiment> [options]``."""

import argparse
import logging
import sys

from .errors import (
    CapacityError, ConvergenceError, DomainError, FormatError, HorizonLabError,
    SaturationError, ValidationError,
)
from .harness import EXPERIMENTS, ExperimentConfig, parse_override, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

log = logging.getLogger("horizonlab")


def build_parser():
    parser = argparse.ArgumentParser(prog="horizonlab", description=__doc__)
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="YAML config file; flags override it")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one parameter (value parsed as YAML)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="base random seed")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for scans")
    parser.add_argument("--plot", action="store_true", help="also emit gnuplot scripts")
    return parser


def make_config(args):
    if args.config:
        config = ExperimentConfig.load(args.config)
        if config.experiment and config.experiment != args.experiment:
            raise ValidationError(
                f"config is for {config.experiment!r}, not {args.experiment!r}", key="experiment")
        config.experiment = args.experiment
    else:
        config = ExperimentConfig(args.experiment)
    for item in args.set:
        key, value = parse_override(item)
        config.parameters[key] = value
    if args.seed is not None:
        config.parameters["seed"] = args.seed
    if args.out:
        config.output_dir = args.out
    if args.threads < 1:
        raise ValidationError("--threads must be at least 1", key="threads")
    return config


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        config = make_config(args)
        manifest = run(config, threads=args.threads, plot=args.plot)
    except ValidationError as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    except (ConvergenceError, DomainError, CapacityError, SaturationError,
            ArithmeticError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (OSError, FormatError) as exc:
        log.error("i/o failure: %s", exc)
        return EXIT_IO
    except HorizonLabError as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    for name in manifest.files:
        log.info("wrote %s", name)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
