"""
core.explanations
~~~~~~~~~~~~~~~~~
Contrastive explanations from two PGD searches in the same L2 ball:

    δ_max  maximises the true-label loss
    δ_min  minimises the true-label loss

What each one shows depends on whether the model got the sample right:

    prediction   δ_max                          δ_min
    correct      pertinent negative             pertinent positive
    wrong        pertinent positive of error    features missing for correct

Both searches share the attack template (steps, restarts, seed) and
differ only in objective.

compare_batch runs the same samples through several models (a robust and
a standard one, say) and puts their triptychs side by side.
"""

from __future__ import annotations

import json
import logging
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from core import network
from core.attacks import pgd
from core.errors import ConfigError, ToolkitError
from core.logs import progress
from core.models import (
    CLASS_NAMES, AttackConfig, ContrastiveExplanation, ModelParams, Norm, Objective, Role,
    Sample, Which,
)
from core.paths import INDEX_NAME
from core.rendering import compose_gallery, compose_side_by_side, compose_triptych, save_png

log = logging.getLogger("EXPLAIN")

INDEX_VERSION = 1
COMPARE_DIR   = "compare"

_ROLES = {
    True:  (Role.PERTINENT_NEGATIVE, Role.PERTINENT_POSITIVE),
    False: (Role.PERTINENT_POSITIVE_OF_ERROR, Role.MISSING_FEATURES_FOR_CORRECT),
}


def assign_roles(is_correct: bool) -> tuple[Role, Role]:
    """(role of δ_max, role of δ_min)."""
    return _ROLES[bool(is_correct)]


def explain(params: ModelParams, sample: Sample, epsilon: float,
            attack: AttackConfig) -> ContrastiveExplanation:
    """
    Raises:
        ConfigError – epsilon not > 0, or a non-L2 attack template
        AttackError – propagated from PGD
    """
    if not epsilon > 0:
        raise ConfigError(f"explanations need epsilon > 0, got {epsilon}")
    if attack.norm is not Norm.L2:
        raise ConfigError(f"explanations use the L2 ball, got {attack.norm.value}")

    maximise = replace(attack, epsilon=float(epsilon), objective=Objective.MAXIMIZE)
    minimise = replace(maximise, objective=Objective.MINIMIZE)
    delta_max = pgd(params, sample.image, sample.label, maximise)
    delta_min = pgd(params, sample.image, sample.label, minimise)

    prediction = delta_max.prediction_before
    is_correct = prediction.predicted_class == sample.label
    role_max, role_min = assign_roles(is_correct)
    return ContrastiveExplanation(
        sample=sample,
        prediction=prediction,
        is_correct=is_correct,
        epsilon=float(epsilon),
        delta_max_result=delta_max,
        delta_min_result=delta_min,
        role_of_delta_max=role_max,
        role_of_delta_min=role_min,
    )


def triptych_for(explanation: ContrastiveExplanation, which: Which,
                 class_names: Sequence[str] = CLASS_NAMES):
    result = explanation.result(which)
    return compose_triptych(
        explanation.sample.image,
        result.image,
        result.delta,
        target=class_names[explanation.sample.label],
        before=class_names[result.prediction_before.predicted_class],
        after=class_names[result.prediction_after.predicted_class],
    )


def render_triptych(explanation: ContrastiveExplanation, which: Which, path: Path,
                    class_names: Sequence[str] = CLASS_NAMES) -> Path:
    """[x | clip(x+δ) | heatmap(δ)] as a grayscale PNG at *path*."""
    return save_png(triptych_for(explanation, which, class_names).canvas, path)


def render_gallery(triptychs: Sequence[np.ndarray], path: Path) -> Path:
    return save_png(compose_gallery(triptychs), path)


# ── Batch ─────────────────────────────────────────────────────────────────────

def explain_batch(
    params: ModelParams,
    samples: Sequence[Sample],
    epsilon: float,
    out_dir: Path,
    attack: AttackConfig,
    class_names: Sequence[str] = CLASS_NAMES,
) -> Path:
    """
    explain + render for every sample. Figures go to ``correct/`` or
    ``error/``; ``index.json`` lists one entry per sample (failures carry an
    ``error`` message instead of results) and one gallery per
    (group, which) that has rows.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    entries: list[dict] = []
    rows: dict[tuple[str, Which], list[np.ndarray]] = {}

    for sample in progress(samples, desc="explain"):
        try:
            explanation = explain(params, sample, epsilon, attack)
            group = "correct" if explanation.is_correct else "error"
            figures = {}
            for which in Which:
                triptych = triptych_for(explanation, which, class_names)
                relative = f"{group}/{sample.sample_id}_{which.value}.png"
                save_png(triptych.canvas, out_dir / relative)
                figures[which.value] = relative
                rows.setdefault((group, which), []).append(triptych.canvas)
        except (ToolkitError, OSError) as exc:
            log.warning(f"{sample.sample_id}: {exc}")
            entries.append({"sample_id": sample.sample_id, "error": str(exc)})
            continue
        entries.append(_entry(params, explanation, figures, class_names))

    galleries = {}
    for (group, which), canvases in sorted(rows.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        relative = f"gallery_{group}_{which.value}.png"
        render_gallery(canvases, out_dir / relative)
        galleries[f"{group}/{which.value}"] = relative

    path = _write_index(out_dir, {
        "format_version": INDEX_VERSION,
        "epsilon":        float(epsilon),
        "entries":        entries,
        "galleries":      galleries,
    })
    failed = sum(1 for e in entries if "error" in e)
    log.info(f"explained {len(entries) - failed}/{len(entries)} sample(s) → {path}")
    return path


def compare_batch(
    models: Sequence[tuple[str, ModelParams]],
    samples: Sequence[Sample],
    epsilon: float,
    out_dir: Path,
    attack: AttackConfig,
    class_names: Sequence[str] = CLASS_NAMES,
) -> Path:
    """
    The same samples explained by every (model_id, params) in *models*.
    Each (sample, which) figure puts the models' triptychs side by side,
    titled with the model id and the role δ plays for it; one gallery per
    which stacks those rows. Everything lands in ``<out_dir>/compare/``.

    Raises:
        ConfigError – fewer than two models, or a repeated model id
    """
    ids = [model_id for model_id, _ in models]
    if len(ids) < 2 or len(set(ids)) != len(ids):
        raise ConfigError(f"comparison needs two or more distinct model ids, got {ids}")

    out_dir = Path(out_dir) / COMPARE_DIR
    out_dir.mkdir(parents=True, exist_ok=True)
    entries: list[dict] = []
    rows: dict[Which, list[np.ndarray]] = {which: [] for which in Which}

    for sample in progress(samples, desc="compare"):
        try:
            explained = [(model_id, explain(params, sample, epsilon, attack)) for model_id, params in models]
        except ToolkitError as exc:
            log.warning(f"{sample.sample_id}: {exc}")
            entries.append({"sample_id": sample.sample_id, "error": str(exc)})
            continue

        figures = {}
        for which in Which:
            row = compose_side_by_side([
                (f"{model_id}: {e.role(which).value}", triptych_for(e, which, class_names).canvas)
                for model_id, e in explained
            ])
            relative = f"{sample.sample_id}_{which.value}.png"
            save_png(row, out_dir / relative)
            figures[which.value] = relative
            rows[which].append(row)

        entries.append({
            "sample_id": sample.sample_id,
            "label":     class_names[sample.label],
            "models": {
                model_id: {
                    "prediction": class_names[e.prediction.predicted_class],
                    "is_correct": bool(e.is_correct),
                    "roles":      {which.value: e.role(which).value for which in Which},
                }
                for model_id, e in explained
            },
            "figures": figures,
        })

    galleries = {}
    for which in Which:
        if rows[which]:
            relative = f"gallery_{which.value}.png"
            render_gallery(rows[which], out_dir / relative)
            galleries[which.value] = relative

    path = _write_index(out_dir, {
        "format_version": INDEX_VERSION,
        "epsilon":        float(epsilon),
        "models":         ids,
        "entries":        entries,
        "galleries":      galleries,
    })
    log.info(f"compared {' vs '.join(ids)} on {len(entries)} sample(s) → {path}")
    return path


def _write_index(out_dir: Path, index: dict) -> Path:
    path = out_dir / INDEX_NAME
    path.write_text(json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _entry(params: ModelParams, explanation: ContrastiveExplanation, figures: dict,
           class_names: Sequence[str]) -> dict:
    sample = explanation.sample
    clean_loss = network.per_sample_losses(params, sample.image[None], [sample.label])[0]
    maxed, mined = explanation.delta_max_result, explanation.delta_min_result
    return {
        "sample_id":  sample.sample_id,
        "label":      class_names[sample.label],
        "prediction": class_names[explanation.prediction.predicted_class],
        "is_correct": bool(explanation.is_correct),
        "roles": {
            Which.DELTA_MAX.value: explanation.role_of_delta_max.value,
            Which.DELTA_MIN.value: explanation.role_of_delta_min.value,
        },
        "predictions_after": {
            Which.DELTA_MAX.value: class_names[maxed.prediction_after.predicted_class],
            Which.DELTA_MIN.value: class_names[mined.prediction_after.predicted_class],
        },
        "losses": {
            "clean":               float(clean_loss),
            Which.DELTA_MAX.value: float(maxed.achieved_loss),
            Which.DELTA_MIN.value: float(mined.achieved_loss),
        },
        "figures": figures,
    }
