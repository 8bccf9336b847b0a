import sys
import logging
import argparse

from config import COMMANDS, ConfigError, RunConfig, parse_config
from runner import EXIT_CONFIG, run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Numerical checks for singular monopoles on Sasakian three-folds.")
    parser.add_argument("command", choices=COMMANDS, help="Check to run.")
    parser.add_argument("--config", type=str, required=True, help="Path to the configuration file.")
    parser.add_argument("--out", type=str, default=None, help="Output directory; overrides output_dir.")
    parser.add_argument("--seed", type=int, default=None, help="Random seed; overrides seed.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level.")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(name)s:%(levelname)s:%(message)s')
    try:
        config = parse_config(args.config)
        if args.seed is not None:
            config = RunConfig.from_dict(dict(config.model_dump(), seed=args.seed))
    except ConfigError as error:
        logging.getLogger(__name__).error("%s", error)
        return EXIT_CONFIG
    return run(config, args.command, args.out)


if __name__ == "__main__":
    sys.exit(main())
