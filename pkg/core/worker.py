"""
core.worker
~~~~~~~~~~~
One cross-validation fold: train, pick the best epoch, report back.

run_fold is a plain module-level function so the Overseer can ship it to
a worker process. It never raises for a failed fold; the FoldResult
carries status=ERROR and the message instead, and the caller decides.
"""

from __future__ import annotations

import logging
from pathlib import Path

from core.errors import ToolkitError
from core.models import FoldResult, FoldTask, WorkerStatus
from core.paths import history_path
from core.training import select_best, train

log = logging.getLogger("WORKER")


def run_fold(task: FoldTask) -> FoldResult:
    result = FoldResult(fold=task.fold, status=WorkerStatus.RUNNING)
    log.info(f"fold {task.fold}: {task.train_config.mode.value} on {len(task.train_set)} frames "
             f"-> {task.run_dir}")
    try:
        history = train(
            task.model_config,
            task.train_config,
            task.train_set,
            task.val_set,
            run_dir=task.run_dir,
            run_id=f"fold_{task.fold}",
        )
        best = select_best(history, task.train_config.mode)
    except ToolkitError as exc:
        return _fail(result, f"fold {task.fold}: {exc}")

    result.status                   = WorkerStatus.DONE
    result.best_epoch               = best.epoch
    result.best_checkpoint          = _relative(task.run_dir, best.checkpoint)
    result.val_clean_accuracy       = best.val_clean_accuracy
    result.val_adversarial_accuracy = best.val_adversarial_accuracy
    result.history_file             = _relative(task.run_dir, history_path(task.run_dir).name)
    log.info(f"fold {task.fold}: best epoch {best.epoch} "
             f"(clean={best.val_clean_accuracy:.3f})")
    return result


def _relative(run_dir: Path, name: str | None) -> str | None:
    """<fold dir name>/<file>, i.e. relative to the run's output directory."""
    if name is None:
        return None
    return f"{Path(run_dir).name}/{name}"


def _fail(result: FoldResult, message: str) -> FoldResult:
    log.error(message)
    result.status        = WorkerStatus.ERROR
    result.error_message = message
    return result
