"""
gen <problem.toml> --out DIR [--seed N] [--coordinate]

Generates the problem described by the ``[problem]`` table and exports it as
A.mtx, b.txt, x_star.txt and problem.meta.
"""
import argparse

from kaczlab.commands._base import Command
from kaczlab.services.exchange import export_problem
from kaczlab.services.experiment import build_problem, parse_problem_spec


def _configure(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("spec", help="TOML file with a [problem] table")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--coordinate", action="store_true", help="write A in sparse coordinate format")


def _handle(args: argparse.Namespace) -> int:
    problem = build_problem(parse_problem_spec(args.spec), args.seed)
    out = export_problem(problem, args.out, coordinate=args.coordinate)
    print(f"{problem.kind.value} {problem.shape[0]}x{problem.shape[1]} written to {out}")
    return 0


command = Command("gen", "generate and export a test problem", _configure, _handle)
