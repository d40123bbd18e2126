"""
cli.app
~~~~~~~
Argument parsing, logging setup and the single place where exceptions
become exit codes:

    0  success
    2  configuration or input error (argparse usage errors included)
    3  training or attack failure
    4  missing artifact
    5  other I/O error
"""

from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import Sequence

from core.errors import ToolkitError
from core.logs import setup_logging

from .commands import cmd_curve, cmd_explain, cmd_report, cmd_synth, cmd_train

log = logging.getLogger("CLI")

EXIT_IO_ERROR = 5


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat JSON config or a manifest.json to rerun")
    common.add_argument("--seed", type=int, help="root seed every component seed derives from")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--jobs", type=int, help="worker processes for folds / curve points")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (value parsed as JSON); repeatable")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="count", default=0, help="debug logging")
    verbosity.add_argument("--quiet", action="store_true", help="warnings only, no progress bars")

    parser = argparse.ArgumentParser(
        prog="robust-pocus",
        description="Adversarial training, robustness curves and contrastive explanations "
                    "for lung-ultrasound frame classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("synth", parents=[common], help="write the synthetic dataset to disk")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("train", parents=[common], help="k-fold ERM or adversarial training")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("curve", parents=[common], help="accuracy against attack radius")
    p.add_argument("--runs", type=Path, nargs="+", metavar="DIR",
                   help="trained run directories, one curve each (default: those of a curve manifest)")
    p.add_argument("--epsilons", help="comma-separated radii starting at 0, e.g. 0,0.25,0.5")
    p.set_defaults(handler=cmd_curve)

    p = sub.add_parser("report", parents=[common], help="per-outcome accuracy and AUROC table")
    p.add_argument("--runs", type=Path, nargs="+", metavar="DIR",
                   help="trained run directories (default: those of a report manifest)")
    p.set_defaults(handler=cmd_report)

    p = sub.add_parser("explain", parents=[common], help="contrastive explanation figures")
    p.add_argument("--run", type=Path, metavar="DIR", help="trained run directory")
    p.add_argument("--fold", type=int, help="whose model and test frames to use (default 0)")
    p.add_argument("--epsilon", type=float, help="L2 radius (default explain_epsilon, then attack_epsilon)")
    p.add_argument("--num-samples", type=int, help="frames to explain (default 8)")
    p.add_argument("--only-errors", action="store_true", default=None,
                   help="explain misclassified frames only")
    p.add_argument("--compare", type=Path, metavar="DIR",
                   help="second trained run; its explanations go side by side with --run's")
    p.set_defaults(handler=cmd_explain)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(-1 if args.quiet else args.verbose)

    try:
        return args.handler(args)
    except ToolkitError as exc:
        log.error(str(exc))
        return exc.exit_code
    except OSError as exc:
        log.error(f"I/O error: {exc}")
        return EXIT_IO_ERROR
