"""
core.network
~~~~~~~~~~~~
Differentiable image classifiers in plain numpy with hand-written
backpropagation.

Every architecture is a fixed list of layers::

    small_cnn : conv3x3(c1) relu pool2 conv3x3(c2) relu pool2 flatten fc(h) relu fc(classes)
    mlp       : flatten fc(h) relu fc(classes)
    linear    : flatten fc(classes)

Convolutions are stride 1 with zero "same" padding; pooling is 2x2 max
with floor semantics (an odd trailing row/column is dropped).

Parameter count for small_cnn (H×W input, c1, c2, h, k classes)::

    conv1 : c1*1*9 + c1
    conv2 : c2*c1*9 + c2
    fc1   : h * c2*(H//4)*(W//4) + h
    head  : k*h + k

e.g. 32×32, c1=8, c2=16, h=32, k=3  →  80 + 1168 + 32800 + 99 = 34147.

The loss is mean softmax cross-entropy over the batch.
"""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from core.errors import InputError
from core.models import Architecture, ModelConfig, ModelParams, Prediction

log = logging.getLogger("NETWORK")

_KERNEL = 3


class InputGradients(NamedTuple):
    """Per-sample objective values, input gradients and logits from one pass."""
    values: np.ndarray      # (N,) scale * per-sample loss
    grads: np.ndarray       # (N, H, W)
    logits: np.ndarray      # (N, classes)


# ── Architecture description ──────────────────────────────────────────────────

def _layers(config: ModelConfig) -> list[tuple[str, str | None]]:
    if config.architecture is Architecture.SMALL_CNN:
        return [
            ("conv", "conv1"), ("relu", None), ("pool", None),
            ("conv", "conv2"), ("relu", None), ("pool", None),
            ("flatten", None),
            ("dense", "fc1"), ("relu", None),
            ("dense", "head"),
        ]
    if config.architecture is Architecture.MLP:
        return [("flatten", None), ("dense", "fc1"), ("relu", None), ("dense", "head")]
    return [("flatten", None), ("dense", "head")]


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Ordered name → shape map for *config*."""
    h, w = config.input_shape
    k = config.num_classes
    hidden = config.hidden_units

    if config.architecture is Architecture.SMALL_CNN:
        c1, c2 = config.conv1_channels, config.conv2_channels
        flat = c2 * (h // 4) * (w // 4)
        return {
            "conv1.weight": (c1, 1, _KERNEL, _KERNEL),
            "conv1.bias":   (c1,),
            "conv2.weight": (c2, c1, _KERNEL, _KERNEL),
            "conv2.bias":   (c2,),
            "fc1.weight":   (hidden, flat),
            "fc1.bias":     (hidden,),
            "head.weight":  (k, hidden),
            "head.bias":    (k,),
        }
    if config.architecture is Architecture.MLP:
        return {
            "fc1.weight":  (hidden, h * w),
            "fc1.bias":    (hidden,),
            "head.weight": (k, hidden),
            "head.bias":   (k,),
        }
    return {
        "head.weight": (k, h * w),
        "head.bias":   (k,),
    }


def param_count(config: ModelConfig) -> int:
    return int(sum(np.prod(shape) for shape in param_shapes(config).values()))


# ── Public API ────────────────────────────────────────────────────────────────

def init_model(config: ModelConfig) -> ModelParams:
    """
    He-style initialisation: weights ~ N(0, 2/fan_in), biases zero.
    Deterministic in config.seed.

    Raises:
        ConfigError – invalid dimensions or class count
    """
    config.validate()
    rng = np.random.default_rng(config.seed)

    weights: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(config).items():
        if name.endswith(".bias"):
            weights[name] = np.zeros(shape, dtype=config.dtype)
            continue
        fan_in = int(np.prod(shape[1:]))
        std = np.sqrt(2.0 / fan_in)
        weights[name] = (rng.standard_normal(shape) * std).astype(config.dtype)

    params = ModelParams(config, weights)
    log.debug(f"init {config.architecture.value}: {params.num_parameters} parameters "
              f"(seed={config.seed})")
    return params


def logits(params: ModelParams, images: np.ndarray) -> np.ndarray:
    x = _as_batch(params, images)
    out, _ = _forward(params, x)
    return out


def forward(params: ModelParams, images: np.ndarray) -> list[Prediction]:
    """One Prediction per image, batch order preserved."""
    z = logits(params, images)
    probs = np.exp(_log_softmax(z))
    return [
        Prediction(
            logits=z[i].copy(),
            probabilities=probs[i].copy(),
            predicted_class=int(np.argmax(z[i])),
        )
        for i in range(z.shape[0])
    ]


def predict_proba(params: ModelParams, images: np.ndarray) -> np.ndarray:
    return np.exp(_log_softmax(logits(params, images)))


def predict(params: ModelParams, images: np.ndarray) -> np.ndarray:
    """argmax of the logits; ties go to the lowest class index."""
    return np.argmax(logits(params, images), axis=1)


def per_sample_losses(params: ModelParams, images: np.ndarray, labels) -> np.ndarray:
    x = _as_batch(params, images)
    y = _as_labels(params, labels, x.shape[0])
    z, _ = _forward(params, x)
    return -_log_softmax(z)[np.arange(len(y)), y]


def loss(params: ModelParams, images: np.ndarray, labels) -> float:
    """Mean cross-entropy, −mean log p(true class)."""
    return float(np.mean(per_sample_losses(params, images, labels)))


def grad_input(params: ModelParams, image: np.ndarray, label: int, scale: float = 1.0) -> np.ndarray:
    """Gradient of ``scale * loss`` with respect to the pixels of one image."""
    result = input_gradients(params, np.asarray(image)[None], [label], scale=scale)
    return result.grads[0]


def input_gradients(params: ModelParams, images: np.ndarray, labels, scale: float = 1.0) -> InputGradients:
    """
    Per-sample ``scale * loss_i`` and its gradient with respect to each
    sample's own pixels (not divided by batch size).
    """
    x = _as_batch(params, images)
    y = _as_labels(params, labels, x.shape[0])
    z, caches = _forward(params, x)
    log_p = _log_softmax(z)
    losses = -log_p[np.arange(len(y)), y]

    dz = np.exp(log_p)
    dz[np.arange(len(y)), y] -= 1.0
    dz *= scale

    dx, _ = _backward(params, dz, caches, want_params=False)
    return InputGradients(scale * losses, dx[:, 0], z)


def grad_params(params: ModelParams, images: np.ndarray, labels) -> dict[str, np.ndarray]:
    """Gradient of the batch-mean loss, keyed like params.weights."""
    return loss_and_grad_params(params, images, labels)[1]


def loss_and_grad_params(params: ModelParams, images: np.ndarray, labels) -> tuple[float, dict[str, np.ndarray]]:
    x = _as_batch(params, images)
    y = _as_labels(params, labels, x.shape[0])
    n = len(y)
    z, caches = _forward(params, x)
    log_p = _log_softmax(z)
    value = float(-np.mean(log_p[np.arange(n), y]))

    dz = np.exp(log_p)
    dz[np.arange(n), y] -= 1.0
    dz /= n

    _, grads = _backward(params, dz, caches, want_params=True)
    return value, {name: grads[name] for name in params.names}


# ── Validation helpers ────────────────────────────────────────────────────────

def _as_batch(params: ModelParams, images: np.ndarray) -> np.ndarray:
    x = np.asarray(images, dtype=params.config.dtype)
    expected = params.config.input_shape
    if x.ndim != 3 or x.shape[1:] != expected:
        raise InputError(
            f"expected a batch of shape (N, {expected[0]}, {expected[1]}), got {x.shape}"
        )
    return x[:, None, :, :]


def _as_labels(params: ModelParams, labels, n: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.shape != (n,):
        raise InputError(f"expected {n} labels, got shape {y.shape}")
    if y.size and not np.issubdtype(y.dtype, np.integer):
        raise InputError(f"labels must be integers, got {y.dtype}")
    y = y.astype(np.int64)
    k = params.config.num_classes
    if y.size and (y.min() < 0 or y.max() >= k):
        raise InputError(f"labels must lie in [0, {k}), got {y.min()}..{y.max()}")
    return y


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


# ── Forward / backward ────────────────────────────────────────────────────────

def _forward(params: ModelParams, x: np.ndarray):
    caches = []
    out = x
    for kind, name in _layers(params.config):
        if kind == "conv":
            out, cache = _conv_forward(out, params[f"{name}.weight"], params[f"{name}.bias"])
        elif kind == "relu":
            cache = out > 0
            out = np.where(cache, out, 0.0).astype(out.dtype, copy=False)
        elif kind == "pool":
            out, cache = _pool_forward(out)
        elif kind == "flatten":
            cache = out.shape
            out = out.reshape(out.shape[0], -1)
        else:
            cache = out
            out = out @ params[f"{name}.weight"].T + params[f"{name}.bias"]
        caches.append(cache)
    return out, caches


def _backward(params: ModelParams, dout: np.ndarray, caches, want_params: bool):
    grads: dict[str, np.ndarray] = {}
    for (kind, name), cache in zip(reversed(_layers(params.config)), reversed(caches)):
        if kind == "conv":
            w = params[f"{name}.weight"]
            dout, dw, db = _conv_backward(dout, cache, w, want_params)
            if want_params:
                grads[f"{name}.weight"], grads[f"{name}.bias"] = dw, db
        elif kind == "relu":
            dout = np.where(cache, dout, 0.0).astype(dout.dtype, copy=False)
        elif kind == "pool":
            dout = _pool_backward(dout, cache)
        elif kind == "flatten":
            dout = dout.reshape(cache)
        else:
            w = params[f"{name}.weight"]
            if want_params:
                grads[f"{name}.weight"] = dout.T @ cache
                grads[f"{name}.bias"] = dout.sum(axis=0)
            dout = dout @ w
    return dout, grads


def _im2col(x: np.ndarray) -> np.ndarray:
    """(N, C, H, W) → (N, H, W, C*9) patches of the zero-padded input."""
    n, c, h, w = x.shape
    pad = _KERNEL // 2
    padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(padded, (_KERNEL, _KERNEL), axis=(2, 3))
    return windows.transpose(0, 2, 3, 1, 4, 5).reshape(n, h, w, c * _KERNEL * _KERNEL)


def _conv_forward(x, weight, bias):
    cols = _im2col(x)
    out = cols @ weight.reshape(weight.shape[0], -1).T + bias
    return out.transpose(0, 3, 1, 2), (cols, x.shape)


def _conv_backward(dout, cache, weight, want_params: bool):
    cols, x_shape = cache
    n, c, h, w = x_shape
    k = weight.shape[0]
    d = dout.transpose(0, 2, 3, 1)                          # (N, H, W, K)

    dw = db = None
    if want_params:
        dw = (d.reshape(-1, k).T @ cols.reshape(-1, cols.shape[-1])).reshape(weight.shape)
        db = d.sum(axis=(0, 1, 2))

    dcols = (d @ weight.reshape(k, -1)).reshape(n, h, w, c, _KERNEL, _KERNEL)
    pad = _KERNEL // 2
    dx = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=dout.dtype)
    for i in range(_KERNEL):
        for j in range(_KERNEL):
            dx[:, :, i:i + h, j:j + w] += dcols[..., i, j].transpose(0, 3, 1, 2)
    return dx[:, :, pad:pad + h, pad:pad + w], dw, db


def _pool_forward(x):
    n, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    blocks = (
        x[:, :, :2 * h2, :2 * w2]
        .reshape(n, c, h2, 2, w2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h2, w2, 4)
    )
    # first maximum wins so ties route the gradient to one cell only
    idx = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
    return out, (idx, x.shape)


def _pool_backward(dout, cache):
    idx, shape = cache
    n, c, h, w = shape
    h2, w2 = idx.shape[2:]
    blocks = np.zeros((n, c, h2, w2, 4), dtype=dout.dtype)
    np.put_along_axis(blocks, idx[..., None], dout[..., None], axis=-1)
    dx = np.zeros(shape, dtype=dout.dtype)
    dx[:, :, :2 * h2, :2 * w2] = (
        blocks.reshape(n, c, h2, w2, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, 2 * h2, 2 * w2)
    )
    return dx
