"""
core.rendering
~~~~~~~~~~~~~~
Figures: contrastive-explanation triptychs and galleries (Pillow, exact
pixels) and robustness-curve plots (matplotlib, Agg backend).

Triptych layout (grayscale, white background, black text)::

              P: <before>     P: <after>
    T: <label> [ x        ]   [ clip(x+δ) ]   [ heatmap(δ) ]

Panels are the 0-1 images scaled by 255 and rounded, upscaled with
nearest-neighbour so every source pixel stays a flat block.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from PIL import Image, ImageDraw, ImageFont  # noqa: E402

from core.models import RobustnessCurve, TrainMode  # noqa: E402

log = logging.getLogger("RENDER")

BACKGROUND = 255
INK        = 0

_LABEL_STRIP = 84     # px left of the first panel for "T: ..."
_HEADER      = 16     # px above the panels for "P: ..."
_GAP         = 4
_ROW_GAP     = 6

Box = tuple[int, int, int, int]    # left, top, right, bottom (exclusive)


@dataclass(frozen=True, eq=False)
class Triptych:
    canvas: np.ndarray                       # H×W uint8
    panel_boxes: tuple[Box, Box, Box]
    text_boxes: dict[str, Box] = field(default_factory=dict)

    def panel(self, index: int) -> np.ndarray:
        left, top, right, bottom = self.panel_boxes[index]
        return self.canvas[top:bottom, left:right]


# ── Pixel helpers ─────────────────────────────────────────────────────────────

def perturbation_heatmap(delta: np.ndarray) -> np.ndarray:
    """0.5 + δ / (2·max|δ|), all 0.5 when δ ≡ 0. Zero always maps to mid-gray."""
    delta = np.asarray(delta, dtype=np.float64)
    peak = float(np.max(np.abs(delta))) if delta.size else 0.0
    if peak == 0.0:
        return np.full(delta.shape, 0.5)
    return 0.5 + delta / (2.0 * peak)


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(image, 0.0, 1.0) * 255).astype(np.uint8)


def save_png(pixels: np.ndarray, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8)).save(path)
    return path


# ── Triptychs ─────────────────────────────────────────────────────────────────

def compose_triptych(
    x: np.ndarray,
    perturbed: np.ndarray,
    delta: np.ndarray,
    target: str,
    before: str,
    after: str,
    scale: int = 4,
) -> Triptych:
    panels = [to_uint8(x), to_uint8(perturbed), to_uint8(perturbation_heatmap(delta))]
    panels = [np.repeat(np.repeat(p, scale, axis=0), scale, axis=1) for p in panels]
    ph, pw = panels[0].shape

    width = _LABEL_STRIP + 3 * pw + 2 * _GAP
    height = _HEADER + ph
    canvas = Image.new("L", (width, height), color=BACKGROUND)

    boxes = []
    for i, pixels in enumerate(panels):
        left = _LABEL_STRIP + i * (pw + _GAP)
        canvas.paste(Image.fromarray(pixels), (left, _HEADER))
        boxes.append((left, _HEADER, left + pw, _HEADER + ph))

    draw = ImageDraw.Draw(canvas)
    font = ImageFont.load_default()
    text_boxes = {
        "T":        _text(draw, font, f"T: {target}", 2, _HEADER + ph // 2),
        "P_before": _text(draw, font, f"P: {before}", boxes[0][0], _HEADER // 2),
        "P_after":  _text(draw, font, f"P: {after}", boxes[1][0], _HEADER // 2),
    }
    return Triptych(canvas=np.asarray(canvas).copy(), panel_boxes=tuple(boxes), text_boxes=text_boxes)


def _text(draw: ImageDraw.ImageDraw, font, text: str, x: int, middle: int) -> Box:
    """Draw *text* left-aligned at x, vertically centred on *middle*."""
    _, top, _, bottom = draw.textbbox((0, 0), text, font=font)
    y = middle - (top + bottom) // 2
    draw.text((x, y), text, fill=INK, font=font)
    left, top, right, bottom = draw.textbbox((x, y), text, font=font)
    return (int(left), int(top), int(right), int(bottom))


def compose_gallery(rows: Sequence[np.ndarray]) -> np.ndarray:
    """Stack triptych canvases top to bottom, padding narrower rows."""
    if not rows:
        raise ValueError("a gallery needs at least one row")
    width = max(r.shape[1] for r in rows)
    height = sum(r.shape[0] for r in rows) + _ROW_GAP * (len(rows) - 1)
    out = np.full((height, width), BACKGROUND, dtype=np.uint8)
    top = 0
    for row in rows:
        out[top:top + row.shape[0], :row.shape[1]] = row
        top += row.shape[0] + _ROW_GAP
    return out


def compose_side_by_side(titled: Sequence[tuple[str, np.ndarray]]) -> np.ndarray:
    """Triptych canvases left to right, each under its own title line."""
    if not titled:
        raise ValueError("nothing to place side by side")
    height = _HEADER + max(c.shape[0] for _, c in titled)
    width = sum(c.shape[1] for _, c in titled) + _LABEL_STRIP // 4 * (len(titled) - 1)
    canvas = Image.new("L", (width, height), color=BACKGROUND)
    draw = ImageDraw.Draw(canvas)
    font = ImageFont.load_default()

    left = 0
    for title, pixels in titled:
        canvas.paste(Image.fromarray(pixels), (left, _HEADER))
        _text(draw, font, title, left + _LABEL_STRIP, _HEADER // 2)
        left += pixels.shape[1] + _LABEL_STRIP // 4
    return np.asarray(canvas).copy()


# ── Curves ────────────────────────────────────────────────────────────────────

def plot_curves(curves: Sequence[RobustnessCurve], path: Path, norm_label: str = "L2") -> Path:
    """Mean accuracy against ε with a ±1 std band; ERM dashed, AT solid."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=(5.0, 3.6), dpi=120)
    for curve in curves:
        eps = np.asarray(curve.epsilons)
        style = "--" if curve.mode is TrainMode.ERM else "-"
        line, = ax.plot(eps, curve.mean, style, marker="o", markersize=3, label=curve.model_id)
        ax.fill_between(eps, curve.mean - curve.std, curve.mean + curve.std,
                        color=line.get_color(), alpha=0.2, linewidth=0)
    ax.set_xlabel(f"{norm_label} attack radius ε")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower left", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    log.info(f"curve plot → {path}")
    return path
