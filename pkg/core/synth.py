"""
core.synth
~~~~~~~~~~
Ultrasound-like frames with one geometric motif per class, for runs
that need no real data.

Every frame shares a dark speckled background and a bright horizontal
pleural band near the top third. Below the band:

    regular    fainter horizontal echoes repeating at multiples of the band depth
    covid      bright vertical streaks running from the band to the bottom edge
    pneumonia  brighter consolidated tissue holding dark rounded pockets

Geometry is drawn once per video from derive_seed(seed, class, video);
each frame moves it by a small Gaussian offset (``jitter`` pixels) and
applies its own speckle from derive_seed(seed, class, video, frame).
Speckle is multiplicative: image · (1 + σ·n) with n smoothed, unit-variance
noise, then clipped to [0, 1].
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from core.models import CLASS_NAMES, DataSource, Dataset, Outcome, Sample, SynthConfig
from core.seeding import derive_seed

log = logging.getLogger("SYNTH")

GENERATOR_VERSION = 1

_ABOVE_BAND   = 0.30
_BELOW_BAND   = 0.22
_CONSOLIDATED = 0.36
_BAND_LEVEL   = 0.85
_POCKET_LEVEL = 0.04
_SPECKLE_GRAIN = 0.8     # gaussian_filter sigma, pixels


@dataclass(frozen=True)
class _Geometry:
    band_y: float
    band_width: float
    motifs: tuple[tuple[float, ...], ...]


# ── Public API ────────────────────────────────────────────────────────────────

def synth_generate(config: SynthConfig) -> Dataset:
    """
    videos_per_class × frames_per_video frames for each of the three
    classes, ordered by (class, video, frame). Bitwise deterministic in
    *config*.

    Raises:
        ConfigError – invalid config
    """
    config.validate()
    size = config.image_size
    samples: list[Sample] = []

    for outcome in Outcome:
        name = outcome.slug
        for v in range(config.videos_per_class):
            video_rng = np.random.default_rng(derive_seed(config.seed, name, v))
            geometry = _draw_geometry(outcome, size, video_rng)
            for f in range(config.frames_per_video):
                rng = np.random.default_rng(derive_seed(config.seed, name, v, f))
                dy, dx = rng.normal(0.0, config.jitter, size=2)
                clean = _render(outcome, geometry, size, dy, dx)
                samples.append(Sample(
                    image=_speckle(clean, config.speckle_sigma, rng),
                    label=int(outcome),
                    video_id=f"{name}_v{v:03d}",
                    frame_index=f,
                ))

    log.info(f"generated {len(samples)} frames "
             f"({config.videos_per_class} videos x {config.frames_per_video} frames x {len(Outcome)} classes)")
    return Dataset(samples=samples, source=DataSource.SYNTHETIC,
                   class_names=CLASS_NAMES, synth_hash=synth_hash(config))


def synth_hash(config: SynthConfig) -> str:
    """SHA-256 of the generator version plus the config, as hex."""
    payload = {"generator_version": GENERATOR_VERSION, **asdict(config)}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()


# ── Geometry ──────────────────────────────────────────────────────────────────

def _draw_geometry(outcome: Outcome, size: int, rng: np.random.Generator) -> _Geometry:
    band_y = rng.uniform(0.27, 0.33) * size
    band_width = rng.uniform(0.035, 0.05) * size

    if outcome is Outcome.REGULAR:
        # (depth, strength) of each repeated echo
        motifs = tuple((m * band_y, 0.40 * 0.8 ** (m - 2))
                       for m in (2, 3) if m * band_y < size - 1)
    elif outcome is Outcome.COVID:
        count = int(rng.integers(2, 4))
        motifs = tuple((rng.uniform(0.15, 0.85) * size, rng.uniform(0.03, 0.05) * size)
                       for _ in range(count))
    else:
        count = int(rng.integers(3, 6))
        motifs = tuple((rng.uniform(band_y + 0.12 * size, 0.9 * size),
                        rng.uniform(0.1, 0.9) * size,
                        rng.uniform(0.07, 0.12) * size)
                       for _ in range(count))
    return _Geometry(band_y=band_y, band_width=band_width, motifs=motifs)


def _render(outcome: Outcome, g: _Geometry, size: int, dy: float, dx: float) -> np.ndarray:
    centres = np.arange(size, dtype=np.float64) + 0.5
    y = centres[:, None] - dy
    x = centres[None, :] - dx

    below = 1.0 / (1.0 + np.exp(-(y - g.band_y)))
    deep_level = _CONSOLIDATED if outcome is Outcome.PNEUMONIA else _BELOW_BAND
    image = _ABOVE_BAND * (1.0 - below) + deep_level * below
    image = np.broadcast_to(image, (size, size)).copy()

    if outcome is Outcome.REGULAR:
        for depth, strength in g.motifs:
            image += strength * np.exp(-((y - depth) / (0.6 * g.band_width)) ** 2)
    elif outcome is Outcome.COVID:
        for column, width in g.motifs:
            image += 0.6 * below * np.exp(-((x - column) / width) ** 2)
    else:
        for cy, cx, radius in g.motifs:
            inside = 1.0 / (1.0 + np.exp((np.hypot(y - cy, x - cx) - radius) / 0.7))
            image = image * (1.0 - inside) + _POCKET_LEVEL * inside

    band = _BAND_LEVEL * np.exp(-((y - g.band_y) / g.band_width) ** 2)
    return np.clip(np.maximum(image, band), 0.0, 1.0)


def _speckle(clean: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    noise = ndimage.gaussian_filter(rng.standard_normal(clean.shape), _SPECKLE_GRAIN)
    spread = noise.std()
    if spread > 0:
        noise = noise / spread
    return np.clip(clean * (1.0 + sigma * noise), 0.0, 1.0)
