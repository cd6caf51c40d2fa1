"""
Command-line entry point: ``python -m kaczlab <verb> ...``.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
import argparse
import logging
import sys
from collections.abc import Sequence

from kaczlab import __version__
from kaczlab.commands import compare_command, gen_command, phantom_command, run_command
from kaczlab.config import get_settings
from kaczlab.errors import ConfigError, KaczlabError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

COMMANDS = (run_command, compare_command, gen_command, phantom_command)

log = logging.getLogger(__name__)


def configure_logging() -> None:
    settings = get_settings()
    logging.basicConfig(
        level=getattr(logging, settings.log_level, logging.INFO),
        format="%(levelname)s: [%(name)s] %(message)s",
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kaczlab",
        description="Randomized Kaczmarz with sketched preconditioning: experiments and tools",
    )
    parser.add_argument("--version", action="version", version=f"kaczlab {__version__}")
    subparsers = parser.add_subparsers(dest="verb", required=True, metavar="{run,compare,gen,phantom}")
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; those are configuration errors here
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    configure_logging()

    try:
        return args.handler(args)
    except ConfigError as exc:
        log.error("Invalid configuration %s", exc.source)
        for line in exc.diagnostics:
            print(f"  {line}", file=sys.stderr)
        return EXIT_CONFIG
    except (KaczlabError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME
    except Exception:
        log.exception("Unhandled error in '%s'", args.verb)
        return EXIT_RUNTIME
