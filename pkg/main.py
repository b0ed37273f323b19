"""
Main entry point for the Lipschitz Outer Space toolkit.
Run this file with a command, e.g. ``python main.py distance --map id``.
"""

import logging
import sys

from ui.cli import build_parser, execute
from utils.config import LOG_LEVEL


def configure_logging(verbosity):
    """Root logger on stderr; -v lowers to INFO, -vv to DEBUG."""
    level = LOG_LEVEL
    if verbosity == 1:
        level = "INFO"
    elif verbosity > 1:
        level = "DEBUG"
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv=None):
    """Parse the command line, run one command and exit with its code."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    sys.exit(execute(args))


if __name__ == "__main__":
    main()
