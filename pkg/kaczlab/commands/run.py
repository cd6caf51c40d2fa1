"""
run <config.toml> [--output-dir DIR]

Runs every (grid variant, seed, method, γ) combination of an experiment file
and writes one trace CSV per run plus summary.csv and manifest.txt.
"""
import argparse
import logging

from kaczlab.commands._base import Command
from kaczlab.services.experiment import load_experiment_config, run_experiment

log = logging.getLogger(__name__)


def _configure(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", help="TOML experiment file")
    parser.add_argument("--output-dir", default=None, help="overrides [run] output_dir and KACZLAB_OUTPUT_DIR")


def _handle(args: argparse.Namespace) -> int:
    config = load_experiment_config(args.config)
    report = run_experiment(config, args.output_dir)
    if report.rows and len(report.failed) == len(report.rows):
        log.error("All %d runs failed", len(report.rows))
        return 2
    print(f"{len(report.rows) - len(report.failed)}/{len(report.rows)} runs written to {report.out_dir}")
    return 0


command = Command("run", "run an experiment configuration", _configure, _handle)
