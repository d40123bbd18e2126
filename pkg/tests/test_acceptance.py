"""Desk-scale ERM vs adversarial training comparison on the reference synthetic data."""

from __future__ import annotations

import json

import numpy as np
import pytest

from cli import main
from cli.commands._runs import evaluation_attack, open_run
from core.evaluation import robustness_curve
from core.presets import REFERENCE_EPSILON, REFERENCE_EXPERIMENT

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def reference_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("reference")
    config = root / "reference.json"
    config.write_text(json.dumps(REFERENCE_EXPERIMENT))
    for mode in ("ERM", "AT"):
        code = main(["train", "--config", str(config), "--out", str(root / mode),
                     "--set", f"mode={mode}", "--set", f"model_id={mode.lower()}",
                     "--jobs", "2", "--quiet"])
        assert code == 0
    return {mode: open_run(root / mode) for mode in ("ERM", "AT")}


def test_adversarial_training_buys_robustness(reference_runs):
    grid = (0.0, 0.5 * REFERENCE_EPSILON, REFERENCE_EPSILON)
    curves = {}
    for mode, trained in reference_runs.items():
        attack = evaluation_attack(trained.run)
        curves[mode] = robustness_curve(trained.params, trained.test_sets, grid, attack,
                                        trained.model_id, trained.mode, jobs=2)

    erm, at = curves["ERM"], curves["AT"]
    assert erm.mean[0] >= 0.90
    assert erm.mean[-1] < 0.50
    assert at.mean[-1] > 0.70
    assert at.mean[-1] - erm.mean[-1] >= 0.20
    for curve in (erm, at):
        assert np.all(np.diff(curve.accuracy, axis=1) <= 0)
