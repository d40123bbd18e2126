"""
core.attacks
~~~~~~~~~~~~
Projected gradient descent inside an L2 or L∞ ball.

Both directions share one ascent loop: ``objective=minimize`` is run as
maximisation of the negated loss, so the two searches take identical
iterates given identical seeds.

Every iterate is made feasible the same way::

    delta  ← project(delta + alpha * direction(g), norm, epsilon)
    image  ← clip(x + delta, 0, 1)
    delta  ← image − x

The zero perturbation is always the first candidate, so a maximising
search never returns a loss below the clean loss and a minimising search
never returns one above it.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Callable, Sequence

import numpy as np

from core import network
from core.errors import AttackError, InputError
from core.models import AttackConfig, ModelParams, Norm, Objective, Perturbation, Prediction, Sample
from core.network import InputGradients
from core.seeding import derive_seed

log = logging.getLogger("ATTACK")

# samples attacked together in one vectorised ascent
_CHUNK = 128

ObjectiveFn = Callable[[np.ndarray], InputGradients]


# ── Projection ────────────────────────────────────────────────────────────────

def project(delta: np.ndarray, norm: Norm, epsilon: float) -> np.ndarray:
    """
    Nearest point of the ball B_norm(epsilon) to *delta*.

    Points already inside come back unchanged (as a copy). L2 points
    outside are rescaled radially onto the sphere; L∞ points are clamped
    componentwise.
    """
    d = np.asarray(delta, dtype=np.result_type(delta, np.float64))
    return _project_rows(d[None], norm, epsilon)[0]


def _project_rows(delta: np.ndarray, norm: Norm, epsilon: float) -> np.ndarray:
    if norm is Norm.LINF:
        return np.clip(delta, -epsilon, epsilon)

    scalar = delta.dtype.type
    norms = _l2(delta)
    out = delta.copy()
    for i in np.flatnonzero(norms > epsilon):
        # factor and row stay in the stored dtype; the check runs on the stored values
        factor = scalar(epsilon / norms[i])
        row = (delta[i] * factor).astype(delta.dtype, copy=False)
        while _l2(row[None])[0] > epsilon:
            factor = np.nextafter(factor, scalar(0))
            row = (delta[i] * factor).astype(delta.dtype, copy=False)
        out[i] = row
    return out


def _l2(rows: np.ndarray) -> np.ndarray:
    """Row norms, accumulated in float64 whatever the stored dtype."""
    flat = rows.reshape(rows.shape[0], -1).astype(np.float64, copy=False)
    return np.sqrt(np.sum(np.square(flat), axis=1))


def random_in_ball(shape: tuple[int, ...], norm: Norm, epsilon: float,
                   rng: np.random.Generator) -> np.ndarray:
    """
    Uniform draw from B_norm(epsilon).

    L2: direction uniform on the sphere, radius epsilon * U^(1/d).
    L∞: every component uniform on [−epsilon, epsilon].
    """
    if norm is Norm.LINF:
        return rng.uniform(-epsilon, epsilon, size=shape)

    direction = rng.standard_normal(shape)
    length = np.sqrt(np.sum(np.square(direction)))
    if length == 0:
        return np.zeros(shape)
    dim = int(np.prod(shape))
    radius = epsilon * rng.random() ** (1.0 / dim)
    return project(direction / length * radius, norm, epsilon)


# ── Public API ────────────────────────────────────────────────────────────────

def pgd(
    params: ModelParams,
    x: np.ndarray,
    y: int,
    config: AttackConfig,
    warm_starts: Sequence[np.ndarray] = (),
) -> Perturbation:
    """
    Search B_norm(epsilon) around image *x* for the delta that maximises
    (or minimises) the true-label cross-entropy.

    *warm_starts* are extra starting deltas; each is projected into the
    ball, evaluated as a candidate and ascended from like a restart.

    Raises:
        ConfigError – invalid attack config
        InputError  – image of the wrong shape or outside [0, 1]
        AttackError – non-finite loss or gradient, naming the PGD step
    """
    config.validate()
    image = _as_image(params, x)
    rng = np.random.default_rng(config.seed)
    starts = [list(warm_starts)] if warm_starts else None
    return _attack_rows(params, image[None], np.array([int(y)]), config, [rng], starts)[0]


def attack_batch(
    params: ModelParams,
    samples: Sequence[Sample],
    config: AttackConfig,
    warm_starts: Sequence[Sequence[np.ndarray]] | None = None,
) -> list[Perturbation]:
    """
    PGD on every sample, order preserved. Each sample is attacked with
    seed derive_seed(config.seed, sample.sample_id), so its result does not
    depend on its position or on the other samples, and equals
    ``pgd(params, s.image, s.label, replace(config, seed=derive_seed(config.seed, s.sample_id)))``.

    Raises:
        AttackError – as pgd, message also names the sample index
    """
    config.validate()
    if not samples:
        return []
    if warm_starts is not None and len(warm_starts) != len(samples):
        raise InputError(f"got {len(warm_starts)} warm-start lists for {len(samples)} samples")

    results: list[Perturbation] = []
    for lo in range(0, len(samples), _CHUNK):
        chunk = samples[lo:lo + _CHUNK]
        images = np.stack([_as_image(params, s.image) for s in chunk])
        labels = np.array([s.label for s in chunk], dtype=np.int64)
        seeds = [derive_seed(config.seed, s.sample_id) for s in chunk]
        rngs = [np.random.default_rng(s) for s in seeds]
        starts = None
        if warm_starts is not None:
            starts = [list(w) for w in warm_starts[lo:lo + _CHUNK]]
        results.extend(
            _attack_rows(params, images, labels, config, rngs, starts, offset=lo, seeds=seeds)
        )
    log.debug(f"attack_batch: {len(results)} sample(s), {config.norm.value} eps={config.epsilon:g}")
    return results


# ── Ascent ────────────────────────────────────────────────────────────────────

def _attack_rows(params, images, labels, config, rngs, starts, offset=None, seeds=None):
    sign = 1.0 if config.objective is Objective.MAXIMIZE else -1.0

    def objective(batch: np.ndarray) -> InputGradients:
        return network.input_gradients(params, batch, labels, scale=sign)

    perturbations = _ascend(images, labels, config, objective, rngs, starts, offset)
    if seeds is not None:
        perturbations = [
            replace(p, config_used=replace(config, seed=s)) for p, s in zip(perturbations, seeds)
        ]
    return perturbations


def _ascend(
    x: np.ndarray,
    y: np.ndarray,
    config: AttackConfig,
    objective: ObjectiveFn,
    rngs: Sequence[np.random.Generator],
    warm_starts: Sequence[Sequence[np.ndarray]] | None = None,
    offset: int | None = None,
) -> list[Perturbation]:
    """
    Maximise *objective* over the ball for every row of *x* at once.

    ``objective(images)`` returns per-row values, gradients of those values
    and logits. Rows never interact, so a batch of one gives the result
    of a single-image search.
    """
    n = x.shape[0]
    sign = 1.0 if config.objective is Objective.MAXIMIZE else -1.0

    values, _, z = objective(x)
    _check_finite(values, None, 0, offset)
    before = [_prediction(z[i]) for i in range(n)]

    best_delta  = np.zeros_like(x)
    best_image  = x.copy()
    best_value  = values.copy()
    best_logits = z.copy()
    counterexample: list[np.ndarray | None] = [
        None if before[i].predicted_class == y[i] else np.zeros_like(x[i]) for i in range(n)
    ]

    def consider(delta, image, vals, logits):
        better = vals > best_value
        best_delta[better]  = delta[better]
        best_image[better]  = image[better]
        best_value[better]  = vals[better]
        best_logits[better] = logits[better]
        flipped = np.argmax(logits, axis=1) != y
        for i in np.flatnonzero(flipped):
            if counterexample[i] is None:
                counterexample[i] = delta[i].copy()

    if config.epsilon > 0:
        alpha = config.alpha
        for start in _starts(x, config, rngs, warm_starts):
            delta, image = _feasible(x, _project_rows(start, config.norm, config.epsilon))
            for step in range(config.num_steps + 1):
                vals, grads, logits = objective(image)
                _check_finite(vals, grads, step, offset)
                consider(delta, image, vals, logits)
                if step == config.num_steps:
                    break
                # zero-gradient rows keep their delta
                moved = delta + alpha * _direction(grads, config.norm)
                delta, image = _feasible(x, _project_rows(moved, config.norm, config.epsilon))

    return [
        Perturbation(
            delta=best_delta[i].copy(),
            image=best_image[i].copy(),
            achieved_loss=float(sign * best_value[i]),
            prediction_before=before[i],
            prediction_after=_prediction(best_logits[i]),
            config_used=config,
            counterexample=counterexample[i],
        )
        for i in range(n)
    ]


def _starts(x, config: AttackConfig, rngs, warm_starts):
    """Restart 0 is the origin unless random_start; later restarts are always random."""
    n = x.shape[0]
    shape = x.shape[1:]
    for r in range(config.num_restarts):
        if r == 0 and not config.random_start:
            yield np.zeros_like(x)
        else:
            yield np.stack([random_in_ball(shape, config.norm, config.epsilon, rngs[i])
                            for i in range(n)]).astype(x.dtype, copy=False)

    if warm_starts is None:
        return
    rounds = max((len(w) for w in warm_starts), default=0)
    for k in range(rounds):
        start = np.zeros_like(x)
        for i, candidates in enumerate(warm_starts):
            if k < len(candidates):
                start[i] = np.asarray(candidates[k], dtype=x.dtype)
        yield start


def _direction(grads: np.ndarray, norm: Norm) -> np.ndarray:
    if norm is Norm.LINF:
        return np.sign(grads)
    lengths = _l2(grads)
    safe = np.where(lengths > 0, lengths, 1.0)
    return grads / safe.astype(grads.dtype)[:, None, None]


def _feasible(x: np.ndarray, delta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    image = np.clip(x + delta, 0.0, 1.0)
    return image - x, image


def _check_finite(values, grads, step: int, offset: int | None) -> None:
    bad = ~np.isfinite(values)
    if grads is not None:
        bad |= ~np.all(np.isfinite(grads.reshape(grads.shape[0], -1)), axis=1)
    if not bad.any():
        return
    where = f"PGD step {step}"
    if offset is not None:
        where = f"sample {offset + int(np.flatnonzero(bad)[0])}, {where}"
    raise AttackError(f"non-finite loss or gradient at {where}")


def _prediction(z: np.ndarray) -> Prediction:
    shifted = z - z.max()
    probs = np.exp(shifted - np.log(np.exp(shifted).sum()))
    return Prediction(logits=z.copy(), probabilities=probs, predicted_class=int(np.argmax(z)))


def _as_image(params: ModelParams, x: np.ndarray) -> np.ndarray:
    image = np.asarray(x, dtype=params.config.dtype)
    if image.shape != params.config.input_shape:
        raise InputError(f"expected an image of shape {params.config.input_shape}, got {image.shape}")
    if image.size and (image.min() < 0 or image.max() > 1):
        raise InputError("image pixels must lie in [0, 1]")
    return image
