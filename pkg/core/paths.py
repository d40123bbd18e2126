"""
core.paths
~~~~~~~~~~
Single source of truth for the layout of run directories.
Import these instead of hard-coding file names anywhere else.

    <out>/manifest.json
    <out>/fold_<i>/epoch_<k>.ckpt
    <out>/fold_<i>/history.jsonl
"""

from __future__ import annotations

from pathlib import Path

MANIFEST_NAME = "manifest.json"
HISTORY_NAME  = "history.jsonl"
INDEX_NAME    = "index.json"


def manifest_path(out_dir: Path) -> Path:
    return Path(out_dir) / MANIFEST_NAME


def fold_dir(out_dir: Path, fold: int) -> Path:
    return Path(out_dir) / f"fold_{fold}"


def checkpoint_path(run_dir: Path, epoch: int) -> Path:
    return Path(run_dir) / f"epoch_{epoch}.ckpt"


def history_path(run_dir: Path) -> Path:
    return Path(run_dir) / HISTORY_NAME


def validate_run_dir(out_dir: Path, manifest: dict | None = None) -> list[str]:
    """
    Return a list of error strings for a trained run directory.
    Empty list means the manifest and every best checkpoint exist.
    """
    out_dir = Path(out_dir)
    errors: list[str] = []
    if not out_dir.is_dir():
        return [f"Run directory not found: {out_dir}"]
    if manifest is None:
        if not manifest_path(out_dir).is_file():
            return [f"Manifest not found: {manifest_path(out_dir)}"]
        return errors

    folds = manifest.get("folds")
    if not folds:
        errors.append(f"Manifest lists no trained folds: {manifest_path(out_dir)}")
        return errors
    for entry in folds:
        ckpt = entry.get("best_checkpoint")
        if not ckpt:
            errors.append(f"Fold {entry.get('fold')} has no best checkpoint")
        elif not (out_dir / ckpt).is_file():
            errors.append(f"Checkpoint not found: {out_dir / ckpt}")
    return errors
