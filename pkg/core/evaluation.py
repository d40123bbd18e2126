"""
core.evaluation
~~~~~~~~~~~~~~~
Clean and adversarial accuracy, robustness curves over an ε grid,
per-outcome recall/AUROC reports and their CSV / text renderings.

Curves
------
Each fold walks its ε grid in ascending order with one AttackCache:

    * a sample whose PGD search found any misclassified candidate stays
      misclassified at every larger ε (balls nest, so that candidate is
      still feasible)
    * otherwise its best delta so far is handed to the next ε as a warm
      start

so every per-fold curve is non-increasing in ε.

Reports
-------
"Acc." per outcome is the recall of that class (correct within class /
frames of that class). AUROC is one-vs-rest on the softmax probability
of the class, counted exactly over all positive/negative pairs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from core import attacks, network
from core.errors import ConfigError, InputError
from core.models import (
    AttackConfig, Dataset, ModelParams, Objective, OutcomeReport, OutcomeRow,
    RobustnessCurve, TrainMode,
)
from core.overseer import Overseer
from core.seeding import derive_seed

log = logging.getLogger("EVAL")

CURVE_COLUMNS   = ["model_id", "fold", "epsilon", "accuracy"]
SUMMARY_COLUMNS = ["model_id", "mode", "epsilon", "mean", "std"]
REPORT_COLUMNS  = ["model_id", "outcome", "accuracy", "auroc", "folds_accuracy", "folds_auroc"]


@dataclass
class AttackCache:
    """Per-sample memory carried along an ascending ε grid."""
    flipped: list[bool] = field(default_factory=list)
    deltas: list[np.ndarray | None] = field(default_factory=list)

    @classmethod
    def empty(cls, size: int) -> AttackCache:
        return cls(flipped=[False] * size, deltas=[None] * size)


# ── Accuracy ──────────────────────────────────────────────────────────────────

def clean_accuracy(params: ModelParams, dataset: Dataset) -> float:
    """
    Raises:
        InputError – empty dataset
    """
    if len(dataset) == 0:
        raise InputError("cannot score an empty dataset")
    correct = network.predict(params, dataset.images()) == dataset.labels()
    return float(np.mean(correct))


def adversarial_accuracy(
    params: ModelParams,
    dataset: Dataset,
    attack: AttackConfig,
    cache: AttackCache | None = None,
) -> float:
    """
    Fraction of samples still classified correctly after PGD. A sample
    counts as wrong if any candidate of its search, or a flip remembered
    in *cache* from a smaller ε, is misclassified. *cache* is updated.

    Raises:
        ConfigError – attack objective is not maximize
        InputError  – empty dataset or cache of the wrong size
    """
    if attack.objective is not Objective.MAXIMIZE:
        raise ConfigError("adversarial accuracy needs a maximising attack")
    if len(dataset) == 0:
        raise InputError("cannot score an empty dataset")
    if cache is None:
        cache = AttackCache.empty(len(dataset))
    if len(cache.flipped) != len(dataset):
        raise InputError(f"attack cache holds {len(cache.flipped)} samples, dataset {len(dataset)}")

    correct = network.predict(params, dataset.images()) == dataset.labels()
    if attack.epsilon == 0:
        return float(np.mean(correct))

    targets = [i for i in range(len(dataset)) if correct[i] and not cache.flipped[i]]
    warm = [[cache.deltas[i]] if cache.deltas[i] is not None else [] for i in targets]
    found = attacks.attack_batch(params, [dataset[i] for i in targets], attack, warm_starts=warm)

    for i, result in zip(targets, found):
        if result.counterexample is not None:
            cache.flipped[i] = True
            cache.deltas[i] = result.counterexample
        else:
            cache.deltas[i] = result.delta

    survived = [correct[i] and not cache.flipped[i] for i in range(len(dataset))]
    return float(np.mean(survived))


# ── Curves ────────────────────────────────────────────────────────────────────

def robustness_curve(
    runs: Sequence[ModelParams],
    folds: Sequence[Dataset],
    epsilons: Sequence[float],
    attack: AttackConfig,
    model_id: str,
    mode: TrainMode | None = None,
    jobs: int = 1,
) -> RobustnessCurve:
    """
    Adversarial accuracy of fold f's model on fold f's test set at every
    ε, with the ε-grid cache described in the module docstring. Folds
    run in parallel when jobs > 1.

    Raises:
        InputError  – runs and folds differ in length, or no folds
        ConfigError – ε grid not strictly ascending from 0
    """
    if len(runs) != len(folds):
        raise InputError(f"{len(runs)} checkpoints for {len(folds)} folds")
    if not runs:
        raise InputError("no folds to evaluate")
    grid = tuple(float(e) for e in epsilons)
    if not grid or grid[0] != 0 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(f"epsilons must ascend strictly from 0, got {list(grid)}")

    tasks = [(fold, params, dataset, grid, attack)
             for fold, (params, dataset) in enumerate(zip(runs, folds))]
    rows = Overseer(jobs, label=f"{model_id} curve").run(_fold_curve, tasks)

    accuracy = np.array(rows, dtype=np.float64).reshape(len(runs), len(grid))
    stats = [aggregate_folds(accuracy[:, j]) for j in range(len(grid))]
    curve = RobustnessCurve(
        model_id=model_id,
        epsilons=grid,
        accuracy=accuracy,
        mean=np.array([m for m, _ in stats]),
        std=np.array([s for _, s in stats]),
        mode=mode,
    )
    log.info(f"{model_id}: " + ", ".join(f"eps={e:g} {m:.3f}" for e, m in zip(grid, curve.mean)))
    return curve


def _fold_curve(task) -> list[float]:
    fold, params, dataset, grid, attack = task
    cache = AttackCache.empty(len(dataset))
    values = []
    for j, eps in enumerate(grid):
        config = replace(attack, epsilon=eps, objective=Objective.MAXIMIZE,
                         seed=derive_seed(attack.seed, fold, j))
        values.append(adversarial_accuracy(params, dataset, config, cache))
        log.debug(f"fold {fold} eps={eps:g}: {values[-1]:.4f}")
    return values


# ── Metrics ───────────────────────────────────────────────────────────────────

def auroc_ovr(scores: np.ndarray, labels: np.ndarray) -> list[float | None]:
    """
    One-vs-rest AUROC per class column of *scores*:
    (pairs where the positive scores higher + ½ · tied pairs) / (P · N).
    None for a class without positives or without negatives.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 2 or scores.shape[0] != labels.shape[0]:
        raise InputError(f"scores {scores.shape} do not match {labels.shape[0]} labels")

    result: list[float | None] = []
    for c in range(scores.shape[1]):
        pos = scores[labels == c, c]
        neg = np.sort(scores[labels != c, c])
        if pos.size == 0 or neg.size == 0:
            result.append(None)
            continue
        below = np.searchsorted(neg, pos, side="left")
        at_or_below = np.searchsorted(neg, pos, side="right")
        wins = int(below.sum())
        ties = int((at_or_below - below).sum())
        result.append((wins + 0.5 * ties) / (pos.size * neg.size))
    return result


def per_class_recall(predictions: np.ndarray, labels: np.ndarray, num_classes: int) -> list[float | None]:
    """Correct-within-class / class count; None for an absent class."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    recalls: list[float | None] = []
    for c in range(num_classes):
        members = labels == c
        count = int(members.sum())
        recalls.append(None if count == 0 else int((predictions[members] == c).sum()) / count)
    return recalls


def aggregate_folds(values: Sequence[float]) -> tuple[float, float]:
    """
    (mean, population std) over folds.

    Raises:
        InputError – no values
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise InputError("cannot aggregate zero folds")
    return float(arr.mean()), float(arr.std(ddof=0))


# ── Reports ───────────────────────────────────────────────────────────────────

def per_outcome_report(
    runs: Sequence[ModelParams],
    folds: Sequence[Dataset],
    model_id: str,
) -> OutcomeReport:
    """
    Per class: mean recall and mean one-vs-rest AUROC over folds. A fold
    where a class is undefined (absent, or no negatives for AUROC) is left
    out of that class's mean with a warning.
    """
    if len(runs) != len(folds):
        raise InputError(f"{len(runs)} checkpoints for {len(folds)} folds")
    if not runs:
        raise InputError("no folds to report on")

    class_names = folds[0].class_names
    recalls: list[list[float]] = [[] for _ in class_names]
    aurocs: list[list[float]] = [[] for _ in class_names]

    for fold, (params, dataset) in enumerate(zip(runs, folds)):
        probs = network.predict_proba(params, dataset.images())
        labels = dataset.labels()
        fold_recall = per_class_recall(np.argmax(probs, axis=1), labels, len(class_names))
        fold_auroc = auroc_ovr(probs, labels)
        for c, name in enumerate(class_names):
            if fold_recall[c] is None:
                log.warning(f"{model_id} fold {fold} has no {name} frames; excluded from the {name} mean")
            else:
                recalls[c].append(fold_recall[c])
            if fold_auroc[c] is None:
                if fold_recall[c] is not None:
                    log.warning(f"{model_id} fold {fold}: {name} AUROC undefined; excluded")
            else:
                aurocs[c].append(fold_auroc[c])

    rows = [
        OutcomeRow(
            model_id=model_id,
            outcome=name,
            accuracy=aggregate_folds(recalls[c])[0] if recalls[c] else None,
            auroc=aggregate_folds(aurocs[c])[0] if aurocs[c] else None,
            folds_accuracy=len(recalls[c]),
            folds_auroc=len(aurocs[c]),
        )
        for c, name in enumerate(class_names)
    ]
    return OutcomeReport(rows=rows)


def combine_reports(reports: Sequence[OutcomeReport]) -> OutcomeReport:
    return OutcomeReport(rows=[row for report in reports for row in report.rows])


def format_outcome_table(report: OutcomeReport) -> str:
    """Model × outcome rows, percentages to three decimals."""
    folds = sorted({r.folds_accuracy for r in report.rows})
    span = "/".join(str(f) for f in folds) if folds else "0"
    lines = [f"Acc. = per-class recall (sensitivity); Acc. and AUROC are means over {span} fold(s), in %."]

    table = pd.DataFrame(
        [
            {
                "Model":   row.model_id if i == 0 else "",
                "Outcome": row.outcome,
                "Acc.":    _percent(row.accuracy),
                "AUROC":   _percent(row.auroc),
            }
            for model in report.model_ids
            for i, row in enumerate(r for r in report.rows if r.model_id == model)
        ],
        columns=["Model", "Outcome", "Acc.", "AUROC"],
    )
    lines.append(table.to_string(index=False))
    return "\n".join(lines) + "\n"


def _percent(value: float | None) -> str:
    return "n/a" if value is None else f"{100.0 * value:.3f}"


# ── CSV ───────────────────────────────────────────────────────────────────────

def curves_frame(curves: Sequence[RobustnessCurve]) -> pd.DataFrame:
    records = [
        {"model_id": c.model_id, "fold": fold, "epsilon": eps, "accuracy": float(c.accuracy[fold, j])}
        for c in curves
        for fold in range(c.num_folds)
        for j, eps in enumerate(c.epsilons)
    ]
    return pd.DataFrame(records, columns=CURVE_COLUMNS)


def write_curves_csv(curves: Sequence[RobustnessCurve], path: Path) -> Path:
    curves_frame(curves).to_csv(path, index=False)
    return Path(path)


def write_curve_summary_csv(curves: Sequence[RobustnessCurve], path: Path) -> Path:
    records = [
        {"model_id": c.model_id, "mode": c.mode.value if c.mode else "",
         "epsilon": eps, "mean": float(c.mean[j]), "std": float(c.std[j])}
        for c in curves
        for j, eps in enumerate(c.epsilons)
    ]
    pd.DataFrame(records, columns=SUMMARY_COLUMNS).to_csv(path, index=False)
    return Path(path)


def read_curves_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path)


def write_report_csv(report: OutcomeReport, path: Path) -> Path:
    frame = pd.DataFrame(
        [
            {"model_id": r.model_id, "outcome": r.outcome, "accuracy": r.accuracy,
             "auroc": r.auroc, "folds_accuracy": r.folds_accuracy, "folds_auroc": r.folds_auroc}
            for r in report.rows
        ],
        columns=REPORT_COLUMNS,
    )
    frame.to_csv(path, index=False)
    return Path(path)


def read_report_csv(path: Path) -> OutcomeReport:
    frame = pd.read_csv(path, dtype={"model_id": str, "outcome": str})
    rows = [
        OutcomeRow(
            model_id=str(rec["model_id"]),
            outcome=str(rec["outcome"]),
            accuracy=None if pd.isna(rec["accuracy"]) else float(rec["accuracy"]),
            auroc=None if pd.isna(rec["auroc"]) else float(rec["auroc"]),
            folds_accuracy=int(rec["folds_accuracy"]),
            folds_auroc=int(rec["folds_auroc"]),
        )
        for rec in frame.to_dict("records")
    ]
    return OutcomeReport(rows=rows)

