"""
``report``: per-outcome mean recall and one-vs-rest AUROC over folds,
one block of rows per run directory. Without ``--runs`` the runs recorded
in a ``--config`` report manifest are used.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from core.config import write_manifest
from core.evaluation import combine_reports, format_outcome_table, per_outcome_report, write_report_csv

from ._runs import flag_or_recorded, open_run, recorded, resolve

REPORT_CSV = "report.csv"
REPORT_TXT = "report.txt"


def cmd_report(args: argparse.Namespace) -> int:
    run = resolve(args)
    runs = [Path(p) for p in flag_or_recorded(args.runs, recorded(args), "runs", required=True)]
    out = run.output_dir

    reports = []
    for path in runs:
        trained = open_run(path)
        reports.append(per_outcome_report(trained.params, trained.test_sets, trained.model_id))
    report = combine_reports(reports)

    table = format_outcome_table(report)
    out.mkdir(parents=True, exist_ok=True)
    (out / REPORT_TXT).write_text(table + "\n", encoding="utf-8")
    write_report_csv(report, out / REPORT_CSV)
    write_manifest(out, "report", run,
                   outputs={"table": REPORT_TXT, "csv": REPORT_CSV},
                   extra={"runs": [str(p) for p in runs]})
    print(table)
    return 0
