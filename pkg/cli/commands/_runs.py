"""
Shared plumbing for the commands: config layering, dataset loading,
fold splits, and reopening trained run directories.
"""

from __future__ import annotations

import argparse
import logging
from dataclasses import dataclass, replace
from pathlib import Path

from core.checkpoint import load_checkpoint
from core.config import (
    load_config_file, merge_config, parse_override, read_manifest, recorded_arguments,
    resolve_run_config,
)
from core.data import Split, group_kfold, load_dataset
from core.errors import ArtifactError, ConfigError
from core.models import Dataset, ModelParams, RunConfig, TrainMode
from core.paths import validate_run_dir
from core.seeding import derive_seed
from core.synth import synth_generate

log = logging.getLogger("CLI")


@dataclass(frozen=True, eq=False)
class TrainedRun:
    """A run directory reopened for evaluation: one model per fold."""
    path: Path
    run: RunConfig
    params: list[ModelParams]
    test_sets: list[Dataset]

    @property
    def model_id(self) -> str:
        return self.run.model_id

    @property
    def mode(self) -> TrainMode:
        return self.run.train.mode


# ── Config ────────────────────────────────────────────────────────────────────

def resolve(args: argparse.Namespace) -> RunConfig:
    """defaults < --config < --set < --seed/--out/--jobs"""
    layers = []
    if args.config is not None:
        layers.append(load_config_file(args.config))
    layers.append(dict(parse_override(text) for text in args.overrides))

    flags = {}
    if args.seed is not None:
        flags["seed"] = args.seed
    if args.out is not None:
        flags["output_dir"] = str(args.out)
    if args.jobs is not None:
        flags["jobs"] = args.jobs
    layers.append(flags)

    return resolve_run_config(merge_config(*layers))


def recorded(args: argparse.Namespace) -> dict:
    """Values the --config manifest recorded for this same command, else {}."""
    if args.config is None:
        return {}
    return recorded_arguments(args.config, args.command)


def flag_or_recorded(value, saved: dict, key: str, default=None, required: bool = False):
    """
    The flag's own *value* when given, else the manifest's *key*, else
    *default*.

    Raises:
        ConfigError – required and found in neither place
    """
    if value is not None:
        return value
    if key in saved:
        return saved[key]
    if required:
        flag = "--" + key.replace("_", "-")
        raise ConfigError(f"{flag} is required (or pass --config with a manifest that recorded it)")
    return default


# ── Data ──────────────────────────────────────────────────────────────────────

def dataset_for(run: RunConfig) -> Dataset:
    if run.data_root is not None:
        return load_dataset(run.data_root, size=run.model.input_shape)
    return synth_generate(run.synth)


def splits_for(run: RunConfig, dataset: Dataset) -> list[Split]:
    return group_kfold(dataset, run.folds, derive_seed(run.seed, "folds"))


def dataset_summary(run: RunConfig, dataset: Dataset) -> dict:
    return {
        "source":     dataset.source.value,
        "data_root":  str(run.data_root) if run.data_root is not None else None,
        "synth_hash": dataset.synth_hash,
        "frames":     len(dataset),
        "videos":     len(dataset.video_labels()),
    }


# ── Trained runs ──────────────────────────────────────────────────────────────

def open_run(path: Path) -> TrainedRun:
    """
    Rebuild the test fold of every trained model under *path* from the
    run's own manifest.

    Raises:
        ArtifactError – manifest or any best checkpoint missing
    """
    path = Path(path)
    errors = validate_run_dir(path)
    if not errors:
        manifest = read_manifest(path)
        errors = validate_run_dir(path, manifest)
    if errors:
        raise ArtifactError("; ".join(errors))

    run = resolve_run_config(manifest["config"])
    dataset = dataset_for(run)
    splits = splits_for(run, dataset)

    params, test_sets = [], []
    for entry in sorted(manifest["folds"], key=lambda e: e["fold"]):
        fold = int(entry["fold"])
        if not 0 <= fold < len(splits):
            raise ArtifactError(f"{path}: fold {fold} is not part of a {run.folds}-fold split")
        params.append(load_checkpoint(path / entry["best_checkpoint"]).params)
        test_sets.append(dataset.subset(splits[fold][1]))

    log.info(f"{path}: {run.model_id} ({run.train.mode.value}), {len(params)} fold(s)")
    return TrainedRun(path=path, run=run, params=params, test_sets=test_sets)


def evaluation_attack(run: RunConfig, epsilon: float | None = None):
    """The config's attack template at evaluation strength."""
    attack = run.train.validation_attack()
    if epsilon is not None:
        attack = replace(attack, epsilon=float(epsilon))
    return attack
