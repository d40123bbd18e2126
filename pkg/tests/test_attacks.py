from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from core import attacks, network
from core.attacks import attack_batch, pgd, project, random_in_ball
from core.errors import AttackError, ConfigError, InputError
from core.models import AttackConfig, Dataset, Norm, Objective, Sample, TrainConfig
from core.seeding import derive_seed
from core.training import train_erm

from .conftest import l2_attack, linear_config, tiny_mlp_config


def _norm(delta, norm):
    return np.max(np.abs(delta)) if norm is Norm.LINF else np.sqrt(np.sum(delta ** 2))


# ── Projection ────────────────────────────────────────────────────────────────

@pytest.mark.parametrize("norm", list(Norm))
def test_projection_properties(norm):
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        dim = int(rng.integers(1, 6))
        delta = rng.normal(0, rng.choice([0.1, 1.0, 10.0]), size=dim)
        eps = float(rng.uniform(0.0, 2.0))

        p = project(delta, norm, eps)
        assert _norm(p, norm) <= eps + 1e-12
        assert np.array_equal(project(p, norm, eps), p)
        if _norm(delta, norm) <= eps:
            assert np.array_equal(p, delta)


def test_l2_projection_is_nearest_point():
    rng = np.random.default_rng(1)
    for _ in range(500):
        delta = rng.normal(size=3) * 3
        eps = float(rng.uniform(0.1, 2.0))
        p = project(delta, Norm.L2, eps)
        alternatives = np.stack([random_in_ball((3,), Norm.L2, eps, rng) for _ in range(20)])
        assert np.all(np.linalg.norm(alternatives - delta, axis=1) >= np.linalg.norm(p - delta) - 1e-12)


def test_linf_projection_clamps_componentwise():
    out = project(np.array([0.5, -2.0, 0.05]), Norm.LINF, 0.1)
    assert np.allclose(out, [0.1, -0.1, 0.05])


def test_projection_does_not_mutate_input():
    delta = np.array([3.0, 4.0])
    project(delta, Norm.L2, 1.0)
    assert np.array_equal(delta, [3.0, 4.0])


def test_float32_rows_project_inside_the_ball_as_stored():
    rng = np.random.default_rng(8)
    for _ in range(2000):
        rows = (rng.normal(size=(3, 5, 5)) * rng.choice([0.1, 1.0, 10.0])).astype(np.float32)
        eps = float(rng.uniform(0.01, 2.0))
        out = attacks._project_rows(rows, Norm.L2, eps)
        assert out.dtype == np.float32
        norms = np.sqrt(np.sum(np.square(out.astype(np.float64)).reshape(3, -1), axis=1))
        assert np.all(norms <= eps)


@pytest.mark.parametrize("norm", list(Norm))
def test_random_in_ball_stays_inside(norm):
    rng = np.random.default_rng(5)
    for _ in range(200):
        assert _norm(random_in_ball((4, 4), norm, 0.3, rng), norm) <= 0.3 + 1e-12


# ── PGD vs. analytic optimum ──────────────────────────────────────────────────

def _random_linear_binary(seed: int):
    config = linear_config(seed=seed, height=4, width=4, classes=2)
    rng = np.random.default_rng(seed)
    params = network.init_model(config).with_weights({
        "head.weight": rng.normal(size=(2, 16)),
        "head.bias":   rng.normal(size=2),
    })
    return params, rng


@pytest.mark.parametrize("seed", range(50))
def test_pgd_reaches_closed_form_optimum_on_linear_logits(seed):
    params, rng = _random_linear_binary(seed)
    x = rng.uniform(0.3, 0.7, size=(4, 4))
    y = int(rng.integers(2))
    eps = 0.1     # keeps x + delta inside [0, 1], so clipping never binds

    w = params["head.weight"]
    g = (w[1 - y] - w[y]).reshape(4, 4)
    optimum = eps * g / np.linalg.norm(g)
    expected = network.loss(params, (x + optimum)[None], [y])

    result = pgd(params, x, y, l2_attack(eps, steps=40))
    assert result.achieved_loss == pytest.approx(expected, rel=1e-4)
    assert np.linalg.norm(result.delta) <= eps + 1e-9


# ── PGD vs. brute-force grid ──────────────────────────────────────────────────

def _two_pixel_problem():
    rng = np.random.default_rng(42)
    points = rng.uniform(0.0, 1.0, size=(200, 2))
    labels = (np.linalg.norm(points - 0.5, axis=1) < 0.3).astype(np.int64)
    samples = [Sample(image=p.reshape(1, 2), label=int(l), video_id=f"p{i}", frame_index=0)
               for i, (p, l) in enumerate(zip(points, labels))]
    data = Dataset(samples=samples, class_names=("out", "in"))
    history = train_erm(
        tiny_mlp_config(seed=3),
        TrainConfig(epochs=30, base_lr=0.1, lr_decay_every=100, batch_size=20, seed=3),
        data, data,
    )
    return history.snapshots[max(history.snapshots)]


def test_pgd_matches_grid_search_on_two_pixel_mlp():
    params = _two_pixel_problem()
    rng = np.random.default_rng(7)
    eps = 0.2
    radii = np.linspace(0.0, eps, 100)
    angles = np.linspace(0.0, 2 * np.pi, 100, endpoint=False)
    grid = np.stack([np.outer(radii, np.cos(angles)).ravel(),
                     np.outer(radii, np.sin(angles)).ravel()], axis=1)

    config = l2_attack(eps, steps=40, num_restarts=3, random_start=True, seed=11)
    good = 0
    for _ in range(100):
        x = rng.uniform(eps, 1 - eps, size=2)
        y = int(rng.integers(2))
        candidates = (x + grid).reshape(-1, 1, 2)
        best = network.per_sample_losses(params, candidates, np.full(len(candidates), y)).max()
        found = pgd(params, x.reshape(1, 2), y, config).achieved_loss
        good += found >= 0.99 * best
    assert good >= 95


# ── Contract ──────────────────────────────────────────────────────────────────

def test_zero_epsilon_returns_zero_perturbation(cnn_params, rng):
    x = rng.random((8, 8))
    result = pgd(cnn_params, x, 1, l2_attack(0.0))
    assert not result.delta.any()
    assert np.array_equal(result.image, x)
    assert result.achieved_loss == pytest.approx(network.loss(cnn_params, x[None], [1]), abs=1e-12)


@pytest.mark.parametrize("norm", list(Norm))
def test_feasibility_near_pixel_bounds(cnn_params, rng, norm):
    x = rng.choice([0.0, 1.0, 0.02, 0.98], size=(8, 8))
    config = AttackConfig(norm=norm, epsilon=0.4, num_steps=15, random_start=True, num_restarts=2)
    for objective in Objective:
        result = pgd(cnn_params, x, 2, replace(config, objective=objective))
        assert _norm(result.delta, norm) <= 0.4 + 1e-9
        assert result.image.min() >= 0.0 and result.image.max() <= 1.0
        assert np.allclose(result.image, x + result.delta, atol=1e-15)
        assert result.achieved_loss == pytest.approx(
            network.loss(cnn_params, result.image[None], [2]), abs=1e-9)


def test_maximize_never_lowers_and_minimize_never_raises_loss(cnn_params, rng):
    for _ in range(10):
        x = rng.random((8, 8))
        y = int(rng.integers(3))
        clean = network.loss(cnn_params, x[None], [y])
        up = pgd(cnn_params, x, y, l2_attack(0.5, steps=5))
        down = pgd(cnn_params, x, y, l2_attack(0.5, steps=5, objective=Objective.MINIMIZE))
        assert up.achieved_loss >= clean - 1e-9
        assert down.achieved_loss <= clean + 1e-9


def test_minimise_takes_the_iterates_of_maximising_the_negated_loss(cnn_params, rng):
    x = rng.random((8, 8))
    y = np.array([1])
    config = l2_attack(0.5, steps=6, random_start=True, num_restarts=2, seed=4)

    def negated(batch):
        return network.input_gradients(cnn_params, batch, y, scale=-1.0)

    ascended = attacks._ascend(x[None], y, config, negated, [np.random.default_rng(4)])[0]
    minimised = pgd(cnn_params, x, 1, replace(config, objective=Objective.MINIMIZE))
    assert np.array_equal(ascended.delta, minimised.delta)
    assert ascended.achieved_loss == -minimised.achieved_loss


def test_pgd_is_deterministic_in_seed(cnn_params, rng):
    x = rng.random((8, 8))
    config = l2_attack(0.5, steps=5, random_start=True, num_restarts=2, seed=9)
    a, b = pgd(cnn_params, x, 0, config), pgd(cnn_params, x, 0, config)
    assert np.array_equal(a.delta, b.delta)
    assert a.achieved_loss == b.achieved_loss


def test_counterexample_is_zero_for_misclassified_input(cnn_params, rng):
    x = rng.random((8, 8))
    wrong = (int(network.predict(cnn_params, x[None])[0]) + 1) % 3
    result = pgd(cnn_params, x, wrong, l2_attack(0.3, steps=3))
    assert result.counterexample is not None
    assert not result.counterexample.any()


def test_warm_start_is_a_candidate(cnn_params, rng):
    x = np.full((8, 8), 0.5)
    y = 0
    warm = rng.normal(size=(8, 8))
    warm *= 0.5 / np.linalg.norm(warm)
    result = pgd(cnn_params, x, y, l2_attack(0.5, steps=1, step_size=1e-9), warm_starts=[warm])
    warm_loss = network.loss(cnn_params, (x + warm)[None], [y])
    assert result.achieved_loss >= warm_loss - 1e-12


def test_invalid_inputs(cnn_params):
    with pytest.raises(InputError):
        pgd(cnn_params, np.full((8, 8), 1.5), 0, l2_attack())
    with pytest.raises(InputError):
        pgd(cnn_params, np.zeros((4, 4)), 0, l2_attack())
    with pytest.raises(ConfigError):
        pgd(cnn_params, np.zeros((8, 8)), 0, l2_attack(-1.0))


def test_non_finite_gradient_names_the_step(cnn_params, monkeypatch):
    real = network.input_gradients
    calls = {"n": 0}

    def poisoned(params, images, labels, scale=1.0):
        out = real(params, images, labels, scale)
        calls["n"] += 1
        if calls["n"] == 3:
            return out._replace(grads=np.full_like(out.grads, np.nan))
        return out

    monkeypatch.setattr(network, "input_gradients", poisoned)
    with pytest.raises(AttackError, match="PGD step 1"):
        pgd(cnn_params, np.full((8, 8), 0.5), 0, l2_attack(0.5, steps=4))


# ── Batches ───────────────────────────────────────────────────────────────────

def test_attack_batch_matches_per_sample_pgd(cnn_params, synth_set):
    samples = list(synth_set)[:5]
    config = l2_attack(0.4, steps=4, random_start=True, num_restarts=2, seed=3)
    batch = attack_batch(cnn_params, samples, config)
    assert len(batch) == 5
    for sample, result in zip(samples, batch):
        seed = derive_seed(config.seed, sample.sample_id)
        single = pgd(cnn_params, sample.image, sample.label, replace(config, seed=seed))
        assert result.config_used.seed == seed
        assert np.allclose(result.delta, single.delta, atol=1e-10)
        assert result.achieved_loss == pytest.approx(single.achieved_loss, abs=1e-10)


def test_attack_batch_results_follow_the_sample_not_its_position(cnn_params, synth_set):
    samples = list(synth_set)[:6]
    config = l2_attack(0.4, steps=4, random_start=True, num_restarts=2, seed=3)
    forward = attack_batch(cnn_params, samples, config)
    order = [5, 2, 0, 4, 1, 3]
    shuffled = attack_batch(cnn_params, [samples[i] for i in order], config)

    unpermuted = [None] * 6
    for position, i in enumerate(order):
        unpermuted[i] = shuffled[position]
    for a, b in zip(forward, unpermuted):
        assert a.config_used.seed == b.config_used.seed
        assert np.allclose(a.delta, b.delta, rtol=0, atol=1e-10)
        assert a.achieved_loss == pytest.approx(b.achieved_loss, abs=1e-10)

    # dropping neighbours leaves a sample's search unchanged too
    alone = attack_batch(cnn_params, samples[3:4], config)[0]
    assert np.allclose(alone.delta, forward[3].delta, rtol=0, atol=1e-10)


def test_attack_batch_of_nothing():
    params = network.init_model(linear_config())
    assert attack_batch(params, [], l2_attack()) == []


def test_attack_batch_spans_chunks(cnn_params, monkeypatch, synth_set):
    monkeypatch.setattr(attacks, "_CHUNK", 4)
    samples = list(synth_set)
    results = attack_batch(cnn_params, samples, l2_attack(0.2, steps=2))
    assert len(results) == len(samples)
    whole = attack_batch(cnn_params, samples[4:6], l2_attack(0.2, steps=2))
    assert np.allclose(results[4].delta, whole[0].delta, atol=1e-10)


def test_attack_batch_rejects_mismatched_warm_starts(cnn_params, synth_set):
    with pytest.raises(InputError):
        attack_batch(cnn_params, list(synth_set)[:3], l2_attack(), warm_starts=[[]])


def test_attack_batch_names_the_failing_sample(cnn_params, synth_set, monkeypatch):
    real = network.input_gradients

    def poisoned(params, images, labels, scale=1.0):
        out = real(params, images, labels, scale)
        values = out.values.copy()
        values[1] = np.inf
        return out._replace(values=values)

    monkeypatch.setattr(network, "input_gradients", poisoned)
    with pytest.raises(AttackError, match="sample 1"):
        attack_batch(cnn_params, list(synth_set)[:3], l2_attack())
