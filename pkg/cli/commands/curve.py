"""
``curve``: adversarial accuracy against attack radius for one or more
trained run directories, written as CSV and one plot. The ε grid lives in
the config; ``--runs`` falls back to the runs a ``--config`` manifest of
an earlier ``curve`` recorded.
"""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

from core.config import write_manifest
from core.errors import ConfigError
from core.evaluation import robustness_curve, write_curve_summary_csv, write_curves_csv
from core.rendering import plot_curves

from ._runs import evaluation_attack, flag_or_recorded, open_run, recorded, resolve

log = logging.getLogger("CLI")

CURVES_CSV  = "curves.csv"
SUMMARY_CSV = "curves_summary.csv"
CURVES_PNG  = "curves.png"


def parse_epsilons(text: str) -> list[float]:
    """'0,0.25,0.5' → [0.0, 0.25, 0.5]"""
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"--epsilons expects comma-separated numbers, got {text!r}") from None


def cmd_curve(args: argparse.Namespace) -> int:
    if args.epsilons is not None:
        args.overrides = [*args.overrides, f"epsilons={parse_epsilons(args.epsilons)}"]
    run = resolve(args)
    runs = [Path(p) for p in flag_or_recorded(args.runs, recorded(args), "runs", required=True)]
    attack = evaluation_attack(run)
    out = run.output_dir
    out.mkdir(parents=True, exist_ok=True)

    curves = []
    for path in runs:
        trained = open_run(path)
        curves.append(robustness_curve(
            trained.params,
            trained.test_sets,
            run.epsilons,
            attack,
            model_id=trained.model_id,
            mode=trained.mode,
            jobs=run.jobs,
        ))

    outputs = {
        "curves":  write_curves_csv(curves, out / CURVES_CSV).name,
        "summary": write_curve_summary_csv(curves, out / SUMMARY_CSV).name,
        "plot":    plot_curves(curves, out / CURVES_PNG, norm_label=attack.norm.value).name,
    }
    write_manifest(out, "curve", run, outputs=outputs,
                   extra={"runs": [str(p) for p in runs]})
    return 0
