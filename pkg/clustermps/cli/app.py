import argparse
import json
import logging
import sys
from typing import List, Optional, TextIO

from clustermps.cli.commands import COMMANDS
from clustermps.core.errors import InvariantViolation, ValidationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INVARIANT = 2


class ClusterSimApp:
    """
    Command-line front end. stdout carries only JSON or CSV; diagnostics go
    to stderr through logging.
    """

    def __init__(self):
        self.commands = {cls.name: cls() for cls in COMMANDS}
        self.parser = self.create_parser()

    def create_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(
            prog="clustermps",
            description="Matrix-product-state simulator for measurement-based computation on cluster states.",
        )
        parser.add_argument("-v", "--verbose", action="count", default=0,
                            help="-v for progress, -vv for per-step detail")
        subparsers = parser.add_subparsers(dest="command", required=True)
        for name, command in self.commands.items():
            sub = subparsers.add_parser(name, help=command.help)
            command.add_arguments(sub)
        return parser

    def configure_logging(self, verbosity: int):
        level = logging.WARNING
        if verbosity == 1:
            level = logging.INFO
        elif verbosity > 1:
            level = logging.DEBUG
        logging.basicConfig(
            level=level,
            stream=sys.stderr,
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )

    def run(self, argv: Optional[List[str]] = None, stdout: Optional[TextIO] = None) -> int:
        out = stdout if stdout is not None else sys.stdout
        try:
            args = self.parser.parse_args(argv)
        except SystemExit as e:
            # argparse exits 0 for --help and 2 for usage errors
            return EXIT_OK if e.code in (0, None) else EXIT_VALIDATION

        self.configure_logging(args.verbose)
        command = self.commands[args.command]
        try:
            return command.execute(args, out)
        except InvariantViolation as e:
            logger.error("Internal invariant violated: %s", e)
            return EXIT_INVARIANT
        except json.JSONDecodeError as e:
            logger.error("Malformed JSON: %s", e)
            return EXIT_VALIDATION
        except (ValidationError, FileNotFoundError, ValueError) as e:
            logger.error("%s", e)
            return EXIT_VALIDATION
