from __future__ import annotations

import numpy as np
import pytest

from core import network
from core.models import (
    Architecture, AttackConfig, Dataset, ModelConfig, Norm, Sample, SynthConfig,
)
from core.synth import synth_generate


# ── Builders ──────────────────────────────────────────────────────────────────

def tiny_cnn_config(seed: int = 0, size: int = 8, dtype: str = "float64") -> ModelConfig:
    return ModelConfig(
        architecture=Architecture.SMALL_CNN,
        input_height=size,
        input_width=size,
        num_classes=3,
        conv1_channels=2,
        conv2_channels=3,
        hidden_units=5,
        seed=seed,
        dtype=dtype,
    )


def tiny_mlp_config(seed: int = 0, height: int = 1, width: int = 2, classes: int = 2,
                    hidden: int = 16) -> ModelConfig:
    return ModelConfig(
        architecture=Architecture.MLP,
        input_height=height,
        input_width=width,
        num_classes=classes,
        hidden_units=hidden,
        seed=seed,
    )


def linear_config(seed: int = 0, height: int = 4, width: int = 4, classes: int = 2) -> ModelConfig:
    return ModelConfig(
        architecture=Architecture.LINEAR,
        input_height=height,
        input_width=width,
        num_classes=classes,
        seed=seed,
    )


def tiny_synth(videos: int = 3, frames: int = 2, size: int = 8, seed: int = 0,
               sigma: float = 0.3, jitter: float = 0.5) -> Dataset:
    return synth_generate(SynthConfig(
        videos_per_class=videos,
        frames_per_video=frames,
        image_size=size,
        speckle_sigma=sigma,
        jitter=jitter,
        seed=seed,
    ))


def random_dataset(n: int, shape: tuple[int, int], classes: int, seed: int = 0) -> Dataset:
    """One frame per video, uniform pixels, labels cycling through the classes."""
    rng = np.random.default_rng(seed)
    samples = [
        Sample(image=rng.random(shape), label=i % classes, video_id=f"v{i:03d}", frame_index=0)
        for i in range(n)
    ]
    return Dataset(samples=samples, class_names=tuple(f"c{c}" for c in range(classes)))


def l2_attack(epsilon: float = 0.5, steps: int = 10, **kwargs) -> AttackConfig:
    return AttackConfig(norm=Norm.L2, epsilon=epsilon, num_steps=steps, **kwargs)


# ── Fixtures ──────────────────────────────────────────────────────────────────

@pytest.fixture
def cnn_params():
    return network.init_model(tiny_cnn_config())


@pytest.fixture
def synth_set():
    return tiny_synth()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
