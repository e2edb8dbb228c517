import argparse
import logging
import sys

from config import load_config_file, load_environment, resolve_config
# Import command modules
from commands import counterfactual, factors, fit, granger, graph, simulate
from utils.exceptions import NumericalError, UsageError, ValidationError

logger = logging.getLogger("micdt")

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
COMMANDS = [fit, granger, graph, simulate, counterfactual, factors]

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


class CliArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting with status 2"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser():
    parser = CliArgumentParser(
        prog="micdt",
        description="Causal digital twin toolkit: SVAR fits, Granger factors, fence graphs and what-if simulation",
    )
    parser.add_argument("--config", help="TOML or JSON file whose keys mirror the flags")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    parser.add_argument("--quiet", action="store_true", help="Only report errors")

    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    for module in COMMANDS:
        module.add_parser(subparsers)
    return parser


def configure_logging(verbose=0, quiet=False):
    if quiet:
        level = logging.ERROR
    elif verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = logging.WARNING

    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)
    logging.captureWarnings(True)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(f"{e}\n")
        parser.print_usage(sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_OK

    configure_logging(args.verbose, args.quiet)
    load_environment()

    flags = {key: value for key, value in vars(args).items() if key not in ("handler", "defaults")}
    try:
        file_config = load_config_file(args.config) if args.config else {}
        config = resolve_config(args.command, flags, args.defaults, file_config)
        return args.handler(config)
    except ValidationError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_VALIDATION
    except NumericalError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
