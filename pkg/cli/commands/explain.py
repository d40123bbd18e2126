"""
``explain``: contrastive explanations for test frames of one fold of a
trained run. Frames are drawn without replacement with a seeded
generator; ``--only-errors`` draws from the misclassified frames only.
``--compare DIR`` explains the same frames with a second run's model of
that fold and writes side-by-side figures under ``compare/``.

Flags left off fall back to the values recorded in a ``--config``
manifest written by an earlier ``explain``, so that manifest reruns the
command as it was.
"""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

import numpy as np

from core import network
from core.config import write_manifest
from core.errors import ArtifactError, ConfigError
from core.explanations import COMPARE_DIR, compare_batch, explain_batch
from core.models import Norm
from core.paths import INDEX_NAME
from core.seeding import derive_seed

from ._runs import evaluation_attack, flag_or_recorded, open_run, recorded, resolve

log = logging.getLogger("CLI")

DEFAULT_NUM_SAMPLES = 8


def cmd_explain(args: argparse.Namespace) -> int:
    run = resolve(args)
    saved = recorded(args)
    run_dir     = Path(flag_or_recorded(args.run, saved, "run", required=True))
    fold        = int(flag_or_recorded(args.fold, saved, "fold", 0))
    num_samples = int(flag_or_recorded(args.num_samples, saved, "num_samples", DEFAULT_NUM_SAMPLES))
    only_errors = bool(flag_or_recorded(args.only_errors, saved, "only_errors", False))
    compare_dir = flag_or_recorded(args.compare, saved, "compare")
    epsilon     = flag_or_recorded(args.epsilon, saved, "epsilon")

    trained = open_run(run_dir)
    if not 0 <= fold < len(trained.params):
        raise ArtifactError(f"{run_dir} has no fold {fold}")
    if num_samples < 1:
        raise ConfigError(f"--num-samples must be >= 1, got {num_samples}")

    if epsilon is None:
        epsilon = run.explain_epsilon if run.explain_epsilon is not None else run.train.attack.epsilon
    attack = evaluation_attack(run, epsilon)
    if attack.norm is not Norm.L2:
        raise ConfigError(f"explanations use the L2 ball; attack_norm is {attack.norm.value}")

    params = trained.params[fold]
    test_set = trained.test_sets[fold]
    pool = np.arange(len(test_set))
    if only_errors:
        wrong = network.predict(params, test_set.images()) != test_set.labels()
        pool = pool[wrong]
    if len(pool) < num_samples:
        log.warning(f"only {len(pool)} candidate frame(s) for {num_samples} requested")

    rng = np.random.default_rng(derive_seed(run.seed, "explain", fold))
    chosen = np.sort(rng.choice(pool, size=min(num_samples, len(pool)), replace=False))
    samples = [test_set[int(i)] for i in chosen]

    out = run.output_dir
    outputs = {"index": INDEX_NAME}
    explain_batch(params, samples, epsilon, out, attack, test_set.class_names)

    if compare_dir is not None:
        other = open_run(Path(compare_dir))
        if not fold < len(other.params):
            raise ArtifactError(f"{compare_dir} has no fold {fold}")
        if [s.sample_id for s in other.test_sets[fold]] != [s.sample_id for s in test_set]:
            raise ConfigError(f"{run_dir} and {compare_dir} test different frames in fold {fold}")
        models = [(trained.model_id, params), (other.model_id, other.params[fold])]
        compare_batch(models, samples, epsilon, out, attack, test_set.class_names)
        outputs["compare"] = f"{COMPARE_DIR}/{INDEX_NAME}"

    write_manifest(
        out, "explain", run,
        outputs=outputs,
        extra={
            "run":         str(run_dir),
            "fold":        fold,
            "num_samples": num_samples,
            "epsilon":     float(epsilon),
            "only_errors": only_errors,
            "compare":     str(compare_dir) if compare_dir is not None else None,
            "samples":     [s.sample_id for s in samples],
        },
    )
    return 0
