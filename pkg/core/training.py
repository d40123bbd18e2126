"""
core.training
~~~~~~~~~~~~~
ERM and adversarial training with SGD + momentum and a step-decay
learning-rate schedule.

Per epoch:
    1. shuffle with default_rng(derive_seed(train.seed, epoch))
    2. for every minibatch b: (AT only) replace the batch by its PGD
       counterparts, attack seed derive_seed(attack.seed, epoch, b);
       then  v ← μ·v + g ;  θ ← θ − lr·v
    3. record clean (and adversarial) validation accuracy, save
       <run_dir>/epoch_<k>.ckpt and append one line to history.jsonl

Every random draw depends only on (seed, epoch, batch), so resuming from
the epoch-k checkpoint reproduces epoch k+1 exactly.
"""

from __future__ import annotations

import json
import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from core import attacks, evaluation, network
from core.checkpoint import load_checkpoint, save_checkpoint
from core.errors import ArtifactError, ConfigError, InputError, TrainingError
from core.logs import progress
from core.models import (
    Dataset, EpochRecord, ModelConfig, ModelParams, TrainConfig, TrainHistory, TrainMode,
)
from core.paths import checkpoint_path, history_path
from core.seeding import derive_seed

log = logging.getLogger("TRAINER")


# ── Schedule ──────────────────────────────────────────────────────────────────

def lr_schedule(epoch: int, config: TrainConfig) -> float:
    """base_lr / decay_factor ** floor(epoch / decay_every), epochs 0-indexed."""
    return config.base_lr / config.lr_decay_factor ** (epoch // config.lr_decay_every)


# ── Public API ────────────────────────────────────────────────────────────────

def train(
    model_config: ModelConfig,
    train_config: TrainConfig,
    train_set: Dataset,
    val_set: Dataset,
    run_dir: Path | None = None,
    resume: Path | None = None,
    run_id: str = "run",
) -> TrainHistory:
    """Dispatch on train_config.mode."""
    if train_config.mode is TrainMode.AT:
        return train_adversarial(model_config, train_config, train_set, val_set,
                                 run_dir=run_dir, resume=resume, run_id=run_id)
    return train_erm(model_config, train_config, train_set, val_set,
                     run_dir=run_dir, resume=resume, run_id=run_id)


def train_erm(model_config, train_config, train_set, val_set,
              run_dir=None, resume=None, run_id="run") -> TrainHistory:
    """Minimise the mean clean cross-entropy."""
    return _fit(model_config, train_config, train_set, val_set,
                adversarial=False, run_dir=run_dir, resume=resume, run_id=run_id)


def train_adversarial(model_config, train_config, train_set, val_set,
                      run_dir=None, resume=None, run_id="run") -> TrainHistory:
    """
    Minimise the mean cross-entropy of PGD-maximised minibatches.

    Raises:
        ConfigError – no attack config, or one that minimises
    """
    if train_config.attack is None:
        raise ConfigError("adversarial training needs an attack config")
    return _fit(model_config, train_config, train_set, val_set,
                adversarial=True, run_dir=run_dir, resume=resume, run_id=run_id)


def select_best(history: TrainHistory, mode: TrainMode) -> EpochRecord:
    """
    ERM: highest clean validation accuracy.
    AT:  highest adversarial validation accuracy.
    Ties go to the earliest epoch.

    Raises:
        InputError – empty history, or AT selection without adversarial accuracies
    """
    if not history.records:
        raise InputError(f"history of {history.run_id!r} has no epochs to select from")

    def metric(record: EpochRecord) -> float:
        if mode is TrainMode.ERM:
            return record.val_clean_accuracy
        if record.val_adversarial_accuracy is None:
            raise InputError(f"epoch {record.epoch} has no adversarial validation accuracy")
        return record.val_adversarial_accuracy

    best = history.records[0]
    for record in history.records[1:]:
        if metric(record) > metric(best):
            best = record
    return best


def read_history(path: Path) -> list[EpochRecord]:
    """
    Raises:
        ArtifactError – file missing or a line is not a valid record
    """
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"History not found: {path}")
    records = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(EpochRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ArtifactError(f"{path}:{lineno} is not a valid epoch record: {exc}") from None
    return records


# ── Loop ──────────────────────────────────────────────────────────────────────

def _fit(model_config, train_config, train_set, val_set, adversarial, run_dir, resume, run_id):
    train_config.validate()
    model_config.validate()
    if len(train_set) == 0:
        raise InputError("training set is empty")
    if len(val_set) == 0:
        raise InputError("validation set is empty")

    mode = TrainMode.AT if adversarial else TrainMode.ERM
    history = TrainHistory(run_id=run_id, mode=mode)

    params, velocity, start_epoch = _starting_point(model_config, resume)
    if run_dir is not None:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        history.records = _restart_history(run_dir, start_epoch)

    images = train_set.images()
    labels = train_set.labels()
    val_attack = train_config.validation_attack()
    n = len(train_set)

    log.info(f"{run_id}: {mode.value} on {n} frames, validating on {len(val_set)} "
             f"(epochs {start_epoch}..{train_config.epochs - 1})")

    for epoch in progress(range(start_epoch, train_config.epochs), desc=f"{run_id} epochs",
                          total=max(train_config.epochs - start_epoch, 0)):
        lr = lr_schedule(epoch, train_config)
        order = np.random.default_rng(derive_seed(train_config.seed, epoch)).permutation(n)

        total = 0.0
        for batch, lo in enumerate(range(0, n, train_config.batch_size)):
            idx = order[lo:lo + train_config.batch_size]
            if adversarial:
                attack = replace(train_config.attack,
                                 seed=derive_seed(train_config.attack.seed, epoch, batch))
                found = attacks.attack_batch(params, [train_set[int(i)] for i in idx], attack)
                batch_images = np.stack([p.image for p in found])
            else:
                batch_images = images[idx]

            value, grads = network.loss_and_grad_params(params, batch_images, labels[idx])
            if not np.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise TrainingError(f"{run_id}: non-finite loss at epoch {epoch}, batch {batch}")

            updated = {}
            for name in params.names:
                velocity[name] = train_config.momentum * velocity[name] + grads[name]
                updated[name] = params[name] - lr * velocity[name]
                if not np.all(np.isfinite(updated[name])):
                    raise TrainingError(
                        f"{run_id}: parameter {name} diverged at epoch {epoch}, batch {batch}"
                    )
            params = params.with_weights(updated)
            total += value * len(idx)

        record = EpochRecord(
            epoch                    = epoch,
            learning_rate            = lr,
            train_loss               = total / n,
            val_clean_accuracy       = evaluation.clean_accuracy(params, val_set),
            val_adversarial_accuracy = (
                evaluation.adversarial_accuracy(params, val_set, val_attack)
                if val_attack is not None else None
            ),
            checkpoint               = _save(run_dir, params, velocity, epoch),
        )
        history.records.append(record)
        history.snapshots[epoch] = params
        if run_dir is not None:
            _append_history(run_dir, record)

        adv = "" if record.val_adversarial_accuracy is None else \
            f" adv={record.val_adversarial_accuracy:.3f}"
        log.info(f"{run_id} epoch {epoch}: lr={lr:g} loss={record.train_loss:.4f} "
                 f"clean={record.val_clean_accuracy:.3f}{adv}")

    return history


def _starting_point(model_config: ModelConfig, resume: Path | None):
    if resume is None:
        params = network.init_model(model_config)
        velocity = {name: np.zeros_like(params[name]) for name in params.names}
        return params, velocity, 0

    ckpt = load_checkpoint(resume)
    if ckpt.params.config != model_config:
        raise ConfigError(f"checkpoint {resume} was trained with a different model config")
    if ckpt.epoch is None:
        raise ArtifactError(f"checkpoint {resume} does not record a training epoch")
    params = ckpt.params
    if ckpt.momentum is not None:
        velocity = {name: np.array(ckpt.momentum[name], dtype=model_config.dtype)
                    for name in params.names}
    else:
        velocity = {name: np.zeros_like(params[name]) for name in params.names}
    log.info(f"resuming from {resume} after epoch {ckpt.epoch}")
    return params, velocity, ckpt.epoch + 1


def _restart_history(run_dir: Path, start_epoch: int) -> list[EpochRecord]:
    """Keep records before start_epoch and rewrite the file to match."""
    path = history_path(run_dir)
    kept = []
    if start_epoch > 0 and path.is_file():
        kept = [r for r in read_history(path) if r.epoch < start_epoch]
    path.write_text("".join(_history_line(r) for r in kept), encoding="utf-8")
    return kept


def _save(run_dir: Path | None, params: ModelParams, velocity, epoch: int) -> str | None:
    if run_dir is None:
        return None
    path = save_checkpoint(checkpoint_path(run_dir, epoch), params, velocity, epoch)
    return path.name


def _append_history(run_dir: Path, record: EpochRecord) -> None:
    with history_path(run_dir).open("a", encoding="utf-8") as fh:
        fh.write(_history_line(record))


def _history_line(record: EpochRecord) -> str:
    return json.dumps(record.to_dict(), sort_keys=True) + "\n"
