"""
core.scanner
~~~~~~~~~~~~
Pure directory walking for the on-disk frame layout. No image decoding,
so it is easy to unit-test in isolation.

    <root>/<label>/<video_id>/<frame>.png
"""

from __future__ import annotations

from pathlib import Path
from typing import NamedTuple, Sequence

from core.errors import DatasetError

# Still-image extensions accepted as frames
IMAGE_EXTENSIONS: frozenset[str] = frozenset({
    ".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff",
})


class FrameEntry(NamedTuple):
    label: int
    video_id: str
    path: Path


# ── Public API ────────────────────────────────────────────────────────────────

def find_frames(root: Path, class_names: Sequence[str]) -> list[FrameEntry]:
    """
    Every frame under *root*, sorted by (label, video_id, filename).

    Stray files directly inside *root* or a label directory are ignored;
    a directory whose name is not a known label is not.

    Raises:
        DatasetError – root missing or empty, unknown label directory,
                       or one video_id filed under two labels
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"Dataset root not found: {root}")

    known = {name: i for i, name in enumerate(class_names)}
    entries: list[FrameEntry] = []
    owner: dict[str, str] = {}

    for label_dir in _subdirs(root):
        if label_dir.name not in known:
            raise DatasetError(
                f"Unknown label directory {label_dir} (expected one of {', '.join(class_names)})"
            )
        for video_dir in _subdirs(label_dir):
            prior = owner.setdefault(video_dir.name, label_dir.name)
            if prior != label_dir.name:
                raise DatasetError(
                    f"Video {video_dir.name!r} appears under both {prior!r} and {label_dir.name!r}"
                )
            for frame in _collect_frames(video_dir):
                entries.append(FrameEntry(known[label_dir.name], video_dir.name, frame))

    if not entries:
        raise DatasetError(f"No frames found under {root}")
    return sorted(entries, key=lambda e: (e.label, e.video_id, e.path.name))


# ── Internal helpers ──────────────────────────────────────────────────────────

def _subdirs(folder: Path) -> list[Path]:
    return sorted(p for p in folder.iterdir() if p.is_dir())


def _collect_frames(folder: Path) -> list[Path]:
    """Image files directly inside *folder* (non-recursive)."""
    return [
        f for f in folder.iterdir()
        if f.is_file() and f.suffix.lower() in IMAGE_EXTENSIONS
    ]
