"""
``synth``: write the configured synthetic dataset to disk in the layout
``load_dataset`` reads, so it can be trained on via ``data_root``.
"""

from __future__ import annotations

import argparse
import logging

from core.config import write_manifest
from core.data import write_dataset
from core.errors import ConfigError
from core.synth import synth_generate

from ._runs import dataset_summary, resolve

log = logging.getLogger("CLI")


def cmd_synth(args: argparse.Namespace) -> int:
    run = resolve(args)
    if run.synth is None:
        raise ConfigError("synth needs synthetic data settings; unset data_root")

    dataset = synth_generate(run.synth)
    out = run.output_dir
    write_dataset(dataset, out)
    write_manifest(
        out, "synth", run,
        outputs={"classes": list(dataset.class_names)},
        extra={"dataset": dataset_summary(run, dataset)},
    )
    log.info(f"synthetic dataset → {out}")
    return 0
