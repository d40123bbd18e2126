"""
core.checkpoint
~~~~~~~~~~~~~~~
Parameter checkpoints as a single ``.npz`` archive.

Archive members
---------------
    format_version      int64 scalar
    config              ModelConfig as a JSON string
    epoch               int64 scalar (-1 when not produced by training)
    param/<name>        each weight array (.npy: name, shape, dtype, C-order bytes)
    momentum/<name>     optional SGD momentum buffers, same names

load_checkpoint(save_checkpoint(p)) returns arrays bitwise-identical to p.
"""

from __future__ import annotations

import json
import logging
import zipfile
from pathlib import Path
from typing import Mapping

import numpy as np

from core.config import dict_to_model_config, model_config_to_dict
from core.errors import ArtifactError
from core.models import Checkpoint, ModelParams
from core.network import param_shapes

log = logging.getLogger("CHECKPOINT")

FORMAT_VERSION = 1

_PARAM = "param/"
_MOMENTUM = "momentum/"


def save_checkpoint(
    path: Path,
    params: ModelParams,
    momentum: Mapping[str, np.ndarray] | None = None,
    epoch: int | None = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    arrays: dict[str, np.ndarray] = {
        "format_version": np.array(FORMAT_VERSION, dtype=np.int64),
        "config":         np.array(json.dumps(model_config_to_dict(params.config), sort_keys=True)),
        "epoch":          np.array(-1 if epoch is None else epoch, dtype=np.int64),
    }
    for name in params.names:
        arrays[_PARAM + name] = np.ascontiguousarray(params[name])
    if momentum is not None:
        for name in params.names:
            arrays[_MOMENTUM + name] = np.ascontiguousarray(momentum[name])

    # a file handle keeps numpy from appending ".npz" to the name
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    log.debug(f"saved {path}")
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    """
    Raises:
        ArtifactError – file missing, not an archive, or wrong format version
    """
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"Checkpoint not found: {path}")

    try:
        with np.load(path, allow_pickle=False) as archive:
            version = int(archive["format_version"])
            if version != FORMAT_VERSION:
                raise ArtifactError(
                    f"Checkpoint {path} has format version {version}, expected {FORMAT_VERSION}"
                )
            config = dict_to_model_config(json.loads(str(archive["config"])))
            epoch = int(archive["epoch"])
            weights = {k[len(_PARAM):]: archive[k] for k in archive.files if k.startswith(_PARAM)}
            momentum = {k[len(_MOMENTUM):]: archive[k] for k in archive.files if k.startswith(_MOMENTUM)}
    except ArtifactError:
        raise
    except (OSError, KeyError, ValueError, zipfile.BadZipFile) as exc:
        raise ArtifactError(f"Checkpoint {path} is unreadable: {exc}") from None

    # restore the architecture's parameter order
    order = list(param_shapes(config))
    if sorted(order) != sorted(weights):
        raise ArtifactError(f"Checkpoint {path} does not match its config's parameter set")

    params = ModelParams(config, {name: weights[name] for name in order})
    return Checkpoint(
        params=params,
        momentum={name: momentum[name] for name in order} if momentum else None,
        epoch=None if epoch < 0 else epoch,
    )
