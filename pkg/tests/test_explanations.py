from __future__ import annotations

import json

import numpy as np
import pytest
from PIL import Image

from core import explanations, network
from core.errors import AttackError, ConfigError
from core.explanations import (
    COMPARE_DIR, assign_roles, compare_batch, explain, explain_batch, render_triptych,
)
from core.models import AttackConfig, Norm, Role, Which

from .conftest import l2_attack, tiny_cnn_config


def test_role_mapping():
    assert assign_roles(True) == (Role.PERTINENT_NEGATIVE, Role.PERTINENT_POSITIVE)
    assert assign_roles(False) == (Role.PERTINENT_POSITIVE_OF_ERROR, Role.MISSING_FEATURES_FOR_CORRECT)


def test_explanations_over_random_samples(cnn_params, synth_set):
    attack = l2_attack(steps=5, seed=3)
    for sample in synth_set:
        e = explain(cnn_params, sample, 0.5, attack)
        predicted = int(network.predict(cnn_params, sample.image[None])[0])
        clean = network.loss(cnn_params, sample.image[None], [sample.label])

        assert e.is_correct == (predicted == sample.label)
        assert (e.role_of_delta_max, e.role_of_delta_min) == assign_roles(e.is_correct)
        assert e.delta_max_result.achieved_loss >= clean - 1e-9
        assert e.delta_min_result.achieved_loss <= clean + 1e-9
        for which in Which:
            result = e.result(which)
            assert np.linalg.norm(result.delta) <= 0.5 + 1e-9
            assert 0.0 <= result.image.min() and result.image.max() <= 1.0


def test_explain_requires_an_l2_radius(cnn_params, synth_set):
    with pytest.raises(ConfigError):
        explain(cnn_params, synth_set[0], 0.0, l2_attack())
    with pytest.raises(ConfigError):
        explain(cnn_params, synth_set[0], 0.5, AttackConfig(norm=Norm.LINF))


def test_rendering_is_deterministic(tmp_path, cnn_params, synth_set):
    e = explain(cnn_params, synth_set[0], 0.5, l2_attack(steps=3))
    a = render_triptych(e, Which.DELTA_MIN, tmp_path / "a.png")
    b = render_triptych(e, Which.DELTA_MIN, tmp_path / "b.png")
    assert a.read_bytes() == b.read_bytes()


def test_explain_batch_index(tmp_path, cnn_params, synth_set):
    samples = list(synth_set)[:4]
    index_path = explain_batch(cnn_params, samples, 0.5, tmp_path, l2_attack(steps=3))
    index = json.loads(index_path.read_text())

    assert index["epsilon"] == 0.5
    assert [e["sample_id"] for e in index["entries"]] == [s.sample_id for s in samples]
    for entry in index["entries"]:
        group = "correct" if entry["is_correct"] else "error"
        for which in ("delta_min", "delta_max"):
            assert entry["figures"][which].startswith(group + "/")
            assert (tmp_path / entry["figures"][which]).is_file()
        assert entry["losses"]["delta_max"] >= entry["losses"]["clean"] - 1e-9
    for relative in index["galleries"].values():
        assert (tmp_path / relative).is_file()

    again = explain_batch(cnn_params, samples, 0.5, tmp_path / "again", l2_attack(steps=3))
    assert json.loads(again.read_text()) == index


def test_explain_batch_records_failures_and_continues(tmp_path, cnn_params, synth_set, monkeypatch):
    samples = list(synth_set)[:3]
    real = explanations.pgd

    def flaky(params, x, y, config, warm_starts=()):
        if x is samples[1].image:
            raise AttackError("non-finite loss or gradient at PGD step 2")
        return real(params, x, y, config, warm_starts)

    monkeypatch.setattr(explanations, "pgd", flaky)
    index = json.loads(explain_batch(cnn_params, samples, 0.5, tmp_path, l2_attack(steps=2)).read_text())
    assert len(index["entries"]) == 3
    assert index["entries"][1] == {"sample_id": samples[1].sample_id,
                                   "error": "non-finite loss or gradient at PGD step 2"}
    assert "figures" in index["entries"][2]


def test_vanishing_radius_leaves_the_image_alone(cnn_params, synth_set):
    sample = synth_set[0]
    e = explain(cnn_params, sample, 1e-9, l2_attack(steps=4, random_start=True, seed=2))
    for which in Which:
        result = e.result(which)
        assert np.max(np.abs(result.delta)) <= 1e-9
        assert np.allclose(result.image, sample.image, rtol=0, atol=1e-8)
        t = explanations.triptych_for(e, which)
        assert np.array_equal(t.panel(0), t.panel(1))


# ── Comparison ────────────────────────────────────────────────────────────────

def test_compare_batch_puts_models_side_by_side(tmp_path, cnn_params, synth_set):
    other = network.init_model(tiny_cnn_config(seed=9))
    samples = list(synth_set)[:2]
    models = [("robust", cnn_params), ("standard", other)]
    index = json.loads(compare_batch(models, samples, 0.5, tmp_path, l2_attack(steps=2)).read_text())

    assert index["models"] == ["robust", "standard"]
    assert [e["sample_id"] for e in index["entries"]] == [s.sample_id for s in samples]
    for entry, sample in zip(index["entries"], samples):
        alone = explain(other, sample, 0.5, l2_attack(steps=2))
        assert entry["models"]["standard"]["is_correct"] == alone.is_correct
        assert entry["models"]["standard"]["roles"]["delta_max"] == alone.role_of_delta_max.value
        for relative in entry["figures"].values():
            assert (tmp_path / COMPARE_DIR / relative).is_file()
    assert sorted(index["galleries"]) == ["delta_max", "delta_min"]

    # each row is wider than a single triptych
    single = explanations.triptych_for(explain(cnn_params, samples[0], 0.5, l2_attack(steps=2)),
                                       Which.DELTA_MAX).canvas
    with Image.open(tmp_path / COMPARE_DIR / index["entries"][0]["figures"]["delta_max"]) as im:
        assert im.size[0] > 2 * single.shape[1]


def test_compare_batch_needs_distinct_models(tmp_path, cnn_params, synth_set):
    samples = list(synth_set)[:1]
    with pytest.raises(ConfigError):
        compare_batch([("a", cnn_params)], samples, 0.5, tmp_path, l2_attack(steps=2))
    with pytest.raises(ConfigError):
        compare_batch([("a", cnn_params), ("a", cnn_params)], samples, 0.5, tmp_path, l2_attack(steps=2))
