"""
Minimal command registry shared by the CLI verbs.

Each verb module builds one ``Command``: its name, a one-line help text, a
function that adds its arguments to a sub-parser and the handler that returns
the process exit code.
"""
import argparse
from collections.abc import Callable
from dataclasses import dataclass


@dataclass(frozen=True)
class Command:
    name: str
    help: str
    configure: Callable[[argparse.ArgumentParser], None]
    handler: Callable[[argparse.Namespace], int]

    def register(self, subparsers) -> argparse.ArgumentParser:
        parser = subparsers.add_parser(self.name, help=self.help, description=self.help)
        self.configure(parser)
        parser.set_defaults(handler=self.handler)
        return parser
