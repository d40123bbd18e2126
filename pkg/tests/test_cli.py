from __future__ import annotations

import json

import numpy as np
import pandas as pd
import pytest

from cli import main
from core import network
from core.checkpoint import load_checkpoint
from core.data import load_dataset

TINY = {
    "input_height":           8,
    "input_width":            8,
    "conv1_channels":         2,
    "conv2_channels":         3,
    "hidden_units":           5,
    "epochs":                 2,
    "batch_size":             8,
    "base_lr":                0.05,
    "attack_epsilon":         0.3,
    "attack_steps":           2,
    "eval_attack_steps":      2,
    "synth_videos_per_class": 2,
    "synth_frames_per_video": 2,
    "folds":                  2,
    "epsilons":               [0.0, 0.3, 0.6],
}


def _run(*argv) -> int:
    return main([*map(str, argv), "--quiet"])


@pytest.fixture(scope="module")
def config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.json"
    path.write_text(json.dumps(TINY))
    return path


@pytest.fixture(scope="module")
def trained(tmp_path_factory, config_file):
    root = tmp_path_factory.mktemp("runs")
    assert _run("train", "--config", config_file, "--out", root / "erm", "--set", "model_id=erm") == 0
    assert _run("train", "--config", config_file, "--out", root / "at",
                "--set", "model_id=at", "--set", "mode=AT") == 0
    return root


def _files(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*.png"))}


# ── synth ─────────────────────────────────────────────────────────────────────

def test_synth_writes_a_loadable_dataset(tmp_path, config_file):
    assert _run("synth", "--config", config_file, "--out", tmp_path / "a", "--seed", 5) == 0
    assert _run("synth", "--config", config_file, "--out", tmp_path / "b", "--seed", 5) == 0

    data = load_dataset(tmp_path / "a", size=(8, 8))
    assert len(data) == 3 * 2 * 2
    assert _files(tmp_path / "a") == _files(tmp_path / "b")
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["command"] == "synth" and manifest["config"]["seed"] == 5


def test_synth_rejects_zero_videos(tmp_path, config_file, capsys):
    code = _run("synth", "--config", config_file, "--out", tmp_path, "--set", "synth_videos_per_class=0")
    assert code == 2
    assert "videos_per_class" in capsys.readouterr().err


def test_train_on_materialised_synthetic_data(tmp_path, config_file):
    assert _run("synth", "--config", config_file, "--out", tmp_path / "data") == 0
    assert _run("train", "--config", config_file, "--out", tmp_path / "run",
                "--set", f"data_root={tmp_path / 'data'}", "--set", "epochs=1") == 0
    manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert manifest["dataset"]["source"] == "disk"


# ── train ─────────────────────────────────────────────────────────────────────

def test_train_manifest_lists_every_fold(trained):
    manifest = json.loads((trained / "erm" / "manifest.json").read_text())
    assert [f["fold"] for f in manifest["folds"]] == [0, 1]
    for entry in manifest["folds"]:
        assert entry["status"] == "done"
        assert (trained / "erm" / entry["best_checkpoint"]).is_file()
        assert (trained / "erm" / entry["history_file"]).is_file()
    assert len(manifest["splits"]) == 2
    assert manifest["seeds"]["root"] == 0


def test_train_rerun_from_manifest_reproduces_outputs(trained, tmp_path):
    source = trained / "erm"
    manifest = (source / "manifest.json").read_bytes()
    history = (source / "fold_0" / "history.jsonl").read_bytes()
    best = json.loads(manifest)["folds"][0]["best_checkpoint"]
    weights = load_checkpoint(source / best).params

    copy = tmp_path / "manifest.json"
    copy.write_bytes(manifest)
    assert _run("train", "--config", copy) == 0
    assert (source / "manifest.json").read_bytes() == manifest
    assert (source / "fold_0" / "history.jsonl").read_bytes() == history
    rerun = load_checkpoint(source / best).params
    assert all(np.array_equal(rerun[n], weights[n]) for n in weights.names)


def test_adversarial_training_at_zero_radius_matches_erm(tmp_path, config_file):
    assert _run("train", "--config", config_file, "--out", tmp_path / "erm",
                "--set", "attack_epsilon=0") == 0
    assert _run("train", "--config", config_file, "--out", tmp_path / "at",
                "--set", "attack_epsilon=0", "--set", "mode=AT") == 0
    erm = json.loads((tmp_path / "erm" / "manifest.json").read_text())
    at = json.loads((tmp_path / "at" / "manifest.json").read_text())
    assert erm["folds"] == at["folds"]


def test_training_divergence_exits_with_three(tmp_path, config_file, monkeypatch, capsys):
    real = network.loss_and_grad_params

    def exploding(params, images, labels):
        return float("nan"), real(params, images, labels)[1]

    monkeypatch.setattr(network, "loss_and_grad_params", exploding)
    assert _run("train", "--config", config_file, "--out", tmp_path) == 3
    err = capsys.readouterr().err
    assert "fold 0" in err and "epoch 0" in err


# ── curve ─────────────────────────────────────────────────────────────────────

def test_curve_for_two_models(trained, tmp_path):
    out = tmp_path / "curve"
    assert _run("curve", "--config", trained / "erm" / "manifest.json", "--out", out,
                "--runs", trained / "erm", trained / "at") == 0

    frame = pd.read_csv(out / "curves.csv")
    assert len(frame) == 2 * 2 * 3
    assert set(frame["model_id"]) == {"erm", "at"}
    for _, group in frame.groupby(["model_id", "fold"]):
        assert np.all(np.diff(group.sort_values("epsilon")["accuracy"].to_numpy()) <= 0)
    summary = pd.read_csv(out / "curves_summary.csv")
    assert set(summary["mode"]) == {"ERM", "AT"}
    assert (out / "curves.png").is_file()

    first = (out / "curves.csv").read_bytes()
    assert _run("curve", "--config", out / "manifest.json", "--out", out,
                "--runs", trained / "erm", trained / "at") == 0
    assert (out / "curves.csv").read_bytes() == first


def test_curve_clean_only(trained, tmp_path):
    assert _run("curve", "--out", tmp_path, "--runs", trained / "erm", "--epsilons", "0") == 0
    frame = pd.read_csv(tmp_path / "curves.csv")
    assert frame["epsilon"].tolist() == [0.0, 0.0]


def test_curve_missing_run_exits_with_four(tmp_path):
    assert _run("curve", "--out", tmp_path / "out", "--runs", tmp_path / "nothing") == 4


def test_curve_needs_runs(tmp_path, capsys):
    assert _run("curve", "--out", tmp_path) == 2
    assert "--runs" in capsys.readouterr().err


def test_curve_rerun_from_manifest_alone(trained, tmp_path):
    assert _run("curve", "--out", tmp_path / "a", "--runs", trained / "erm", trained / "at",
                "--epsilons", "0,0.2") == 0
    assert _run("curve", "--config", tmp_path / "a" / "manifest.json", "--out", tmp_path / "b") == 0
    for name in ("curves.csv", "curves_summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert pd.read_csv(tmp_path / "b" / "curves.csv")["epsilon"].max() == 0.2


# ── report ────────────────────────────────────────────────────────────────────

def test_report_for_two_models(trained, tmp_path, capsys):
    assert _run("report", "--out", tmp_path, "--runs", trained / "erm", trained / "at") == 0
    printed = capsys.readouterr().out
    frame = pd.read_csv(tmp_path / "report.csv")
    assert len(frame) == 6
    assert frame["outcome"].tolist() == ["covid", "pneumonia", "regular"] * 2
    assert (tmp_path / "report.txt").read_text() == printed
    for value in frame["accuracy"].dropna():
        assert f"{100 * value:.3f}" in printed


def test_report_rerun_from_manifest_alone(trained, tmp_path):
    assert _run("report", "--out", tmp_path / "a", "--runs", trained / "erm", trained / "at") == 0
    assert _run("report", "--config", tmp_path / "a" / "manifest.json", "--out", tmp_path / "b") == 0
    for name in ("report.csv", "report.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_report_ignores_runs_of_another_commands_manifest(trained, tmp_path):
    # a train manifest records folds, not runs
    assert _run("report", "--config", trained / "erm" / "manifest.json", "--out", tmp_path) == 2


# ── explain ───────────────────────────────────────────────────────────────────

def test_explain_writes_requested_samples(trained, tmp_path):
    args = ["explain", "--run", trained / "erm", "--fold", 1, "--num-samples", 3, "--epsilon", 0.5]
    assert _run(*args, "--out", tmp_path / "a") == 0
    assert _run(*args, "--out", tmp_path / "b") == 0

    index = json.loads((tmp_path / "a" / "index.json").read_text())
    assert len(index["entries"]) == 3
    assert (tmp_path / "a" / "index.json").read_bytes() == (tmp_path / "b" / "index.json").read_bytes()
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_explain_only_errors(trained, tmp_path):
    assert _run("explain", "--run", trained / "at", "--only-errors", "--num-samples", 4,
                "--out", tmp_path) == 0
    index = json.loads((tmp_path / "index.json").read_text())
    assert all(entry["is_correct"] is False for entry in index["entries"])


def test_explain_unknown_fold(trained, tmp_path):
    assert _run("explain", "--run", trained / "erm", "--fold", 7, "--out", tmp_path) == 4


def test_explain_rerun_from_manifest_alone(trained, tmp_path):
    assert _run("explain", "--run", trained / "erm", "--fold", 1, "--num-samples", 2,
                "--epsilon", 0.4, "--out", tmp_path / "a") == 0
    assert _run("explain", "--config", tmp_path / "a" / "manifest.json", "--out", tmp_path / "b") == 0

    first = json.loads((tmp_path / "a" / "manifest.json").read_text())
    again = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert (again["fold"], again["num_samples"], again["epsilon"]) == (1, 2, 0.4)
    assert again["samples"] == first["samples"]
    assert (tmp_path / "a" / "index.json").read_bytes() == (tmp_path / "b" / "index.json").read_bytes()
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_explain_flags_override_the_manifest(trained, tmp_path):
    assert _run("explain", "--run", trained / "erm", "--num-samples", 2, "--out", tmp_path / "a") == 0
    assert _run("explain", "--config", tmp_path / "a" / "manifest.json", "--num-samples", 3,
                "--out", tmp_path / "b") == 0
    index = json.loads((tmp_path / "b" / "index.json").read_text())
    assert len(index["entries"]) == 3


def test_explain_needs_a_run(tmp_path, capsys):
    assert _run("explain", "--out", tmp_path) == 2
    assert "--run" in capsys.readouterr().err


def test_explain_compares_two_runs_side_by_side(trained, tmp_path):
    assert _run("explain", "--run", trained / "erm", "--compare", trained / "at",
                "--num-samples", 2, "--out", tmp_path) == 0
    index = json.loads((tmp_path / "compare" / "index.json").read_text())
    plain = json.loads((tmp_path / "index.json").read_text())

    assert index["models"] == ["erm", "at"]
    assert [e["sample_id"] for e in index["entries"]] == [e["sample_id"] for e in plain["entries"]]
    for entry in index["entries"]:
        assert set(entry["models"]) == {"erm", "at"}
        for which in ("delta_min", "delta_max"):
            assert (tmp_path / "compare" / entry["figures"][which]).is_file()
    assert set(index["galleries"]) == {"delta_min", "delta_max"}
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["compare"] == str(trained / "at")
    assert manifest["outputs"]["compare"] == "compare/index.json"
