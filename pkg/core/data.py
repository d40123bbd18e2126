"""
core.data
~~~~~~~~~
Frames in, Dataset out; Dataset in, folds or PNG tree out.

Preprocessing
-------------
    integer pixels   →  divided by the dtype's maximum (8-bit 128 → 128/255)
    float pixels     →  taken as already in [0, 1]
    RGB / RGBA       →  mean of the three colour channels
    resize           →  bilinear, half-pixel centres, edge-replicated borders

Folds
-----
Videos, never frames, are dealt to folds: StratifiedKFold runs over one row
per video (sorted by id, labelled with the video's diagnosis) with the
fold seed as random_state, and every frame follows its video. Each fold
holds within one video of its exact share of every class.
"""

from __future__ import annotations

import logging
import warnings
from collections import Counter
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image
from scipy import ndimage
from sklearn.model_selection import StratifiedKFold

from core.errors import DatasetError, InputError
from core.models import CLASS_NAMES, DataSource, Dataset, Sample
from core.scanner import find_frames

log = logging.getLogger("DATA")

Split = tuple[np.ndarray, np.ndarray]


# ── Preprocessing ─────────────────────────────────────────────────────────────

def preprocess(image: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """
    Raw frame → float64 H×W array in [0, 1] of shape *size*.

    Raises:
        InputError – empty image, or not 2-D / RGB(A)
    """
    raw = np.asarray(image)
    if raw.size == 0:
        raise InputError("cannot preprocess an empty image")
    if raw.ndim == 3 and raw.shape[-1] in (3, 4):
        scaled = _to_unit(raw[..., :3]).mean(axis=-1)
    elif raw.ndim == 2:
        scaled = _to_unit(raw)
    else:
        raise InputError(f"expected a grayscale or RGB image, got shape {raw.shape}")

    height, width = size
    if scaled.shape != (height, width):
        factors = (height / scaled.shape[0], width / scaled.shape[1])
        scaled = ndimage.zoom(scaled, factors, order=1, mode="nearest", grid_mode=True)
    return np.clip(scaled, 0.0, 1.0)


def _to_unit(raw: np.ndarray) -> np.ndarray:
    if raw.dtype == np.bool_:
        return raw.astype(np.float64)
    if np.issubdtype(raw.dtype, np.integer):
        return raw.astype(np.float64) / np.iinfo(raw.dtype).max
    return raw.astype(np.float64)


# ── Disk I/O ──────────────────────────────────────────────────────────────────

def load_dataset(
    root: Path,
    size: tuple[int, int] = (32, 32),
    class_names: Sequence[str] = CLASS_NAMES,
) -> Dataset:
    """
    Read ``<root>/<label>/<video_id>/<frame>`` into a Dataset. Frame
    indices count from 0 within each video in filename order.

    Raises:
        DatasetError – layout problems (see core.scanner) or an unreadable image
    """
    entries = find_frames(root, class_names)
    samples: list[Sample] = []
    position: Counter[str] = Counter()

    for entry in entries:
        try:
            with Image.open(entry.path) as im:
                pixels = _decode(im)
        except OSError as exc:
            raise DatasetError(f"Unreadable image {entry.path}: {exc}") from None
        samples.append(Sample(
            image=preprocess(pixels, size),
            label=entry.label,
            video_id=entry.video_id,
            frame_index=position[entry.video_id],
        ))
        position[entry.video_id] += 1

    log.info(f"loaded {len(samples)} frames from {len(position)} videos under {root}")
    return Dataset(samples=samples, source=DataSource.DISK, class_names=tuple(class_names))


def _decode(im: Image.Image) -> np.ndarray:
    if im.mode in ("L", "I;16", "I;16L", "I;16B", "RGB", "RGBA"):
        return np.asarray(im)
    return np.asarray(im.convert("RGB"))


def write_dataset(dataset: Dataset, root: Path) -> Path:
    """
    Materialise *dataset* as 8-bit grayscale PNGs in the load_dataset
    layout; frame i of a video becomes ``frame_{i:03d}.png``.
    """
    root = Path(root)
    for sample in dataset:
        folder = root / dataset.class_names[sample.label] / sample.video_id
        folder.mkdir(parents=True, exist_ok=True)
        pixels = np.rint(np.clip(sample.image, 0.0, 1.0) * 255).astype(np.uint8)
        Image.fromarray(pixels).save(folder / f"frame_{sample.frame_index:03d}.png")
    log.info(f"wrote {len(dataset)} frames to {root}")
    return root


# ── Folds ─────────────────────────────────────────────────────────────────────

def group_kfold(dataset: Dataset, k: int, seed: int) -> list[Split]:
    """
    k (train_indices, test_indices) pairs over frame positions, grouped by
    video and stratified by label.

    Raises:
        InputError – k < 2, more folds than videos, or every class has
                     fewer than k videos
    """
    video_labels = dataset.video_labels()
    if k < 2:
        raise InputError(f"need at least 2 folds, got {k}")
    if k > len(video_labels):
        raise InputError(f"cannot split {len(video_labels)} videos into {k} folds")

    videos = sorted(video_labels)
    labels = np.array([video_labels[v] for v in videos], dtype=np.int64)
    per_class = np.bincount(labels)
    if np.all(per_class[per_class > 0] < k):
        raise InputError(f"cannot stratify {len(videos)} videos into {k} folds: "
                         f"every class has fewer than {k} videos")
    if np.any(per_class[per_class > 0] < k):
        log.warning(f"some class has fewer than {k} videos; not every fold will hold it")

    splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
    fold_of: dict[str, int] = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        for fold, (_, test_rows) in enumerate(splitter.split(np.zeros(len(videos)), labels)):
            for row in test_rows:
                fold_of[videos[row]] = fold

    assignment = np.array([fold_of[v] for v in dataset.video_ids()], dtype=np.int64)
    positions = np.arange(len(dataset))
    return [(positions[assignment != f], positions[assignment == f]) for f in range(k)]


def split_summary(dataset: Dataset, splits: Sequence[Split]) -> list[dict]:
    """Per-fold video and frame counts by class, for logs and manifests."""
    summary = []
    for fold, (train_idx, test_idx) in enumerate(splits):
        test = dataset.subset(test_idx)
        per_class = Counter(test.video_labels().values())
        summary.append({
            "fold":         fold,
            "train_frames": int(len(train_idx)),
            "test_frames":  int(len(test_idx)),
            "test_videos":  {dataset.class_names[c]: per_class.get(c, 0)
                             for c in range(dataset.num_classes)},
        })
        log.debug(f"fold {fold}: {len(train_idx)} train / {len(test_idx)} test frames, "
                  f"test videos {summary[-1]['test_videos']}")
    return summary
