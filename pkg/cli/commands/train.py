"""
``train``: k-fold cross-validation over videos. Each fold trains one
model (ERM or AT per the config) into ``fold_<i>/`` and keeps its best
epoch; the manifest lists every fold's best checkpoint.
"""

from __future__ import annotations

import argparse
import logging
from dataclasses import asdict, replace

from core.config import write_manifest
from core.data import split_summary
from core.errors import TrainingError
from core.models import FoldTask, WorkerStatus
from core.overseer import Overseer
from core.paths import fold_dir
from core.seeding import derive_seed
from core.worker import run_fold

from ._runs import dataset_for, dataset_summary, resolve, splits_for

log = logging.getLogger("CLI")


def cmd_train(args: argparse.Namespace) -> int:
    run = resolve(args)
    dataset = dataset_for(run)
    splits = splits_for(run, dataset)
    out = run.output_dir

    tasks = [
        FoldTask(
            fold=fold,
            model_config=replace(run.model, seed=derive_seed(run.model.seed, fold)),
            train_config=replace(run.train, seed=derive_seed(run.train.seed, fold)),
            train_set=dataset.subset(train_idx),
            val_set=dataset.subset(test_idx),
            run_dir=fold_dir(out, fold),
        )
        for fold, (train_idx, test_idx) in enumerate(splits)
    ]
    results = Overseer(run.jobs, label="folds").run(run_fold, tasks)

    failed = [r for r in results if r.status is not WorkerStatus.DONE]
    if failed:
        raise TrainingError("; ".join(r.error_message for r in failed))

    folds = []
    for result in results:
        entry = asdict(result)
        entry["status"] = result.status.value
        del entry["error_message"]
        folds.append(entry)

    write_manifest(
        out, "train", run,
        outputs={"folds": [fold_dir(out, r.fold).name for r in results]},
        extra={
            "folds":   folds,
            "splits":  split_summary(dataset, splits),
            "dataset": dataset_summary(run, dataset),
        },
    )
    for r in results:
        adv = "" if r.val_adversarial_accuracy is None else f", adv {r.val_adversarial_accuracy:.3f}"
        log.info(f"fold {r.fold}: best epoch {r.best_epoch} "
                 f"(clean {r.val_clean_accuracy:.3f}{adv})")
    return 0
