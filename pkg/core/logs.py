"""
core.logs
~~~~~~~~~
Console logging in the "[TAG] message" style used across the package.

Every module grabs ``logging.getLogger("<TAG>")`` with an upper-case
component tag (TRAINER, ATTACK, OVERSEER, ...). Nothing here writes to
artifacts, so log level never changes what a run produces.
"""

from __future__ import annotations

import logging
import sys
from typing import Iterable, TypeVar

from tqdm import tqdm

T = TypeVar("T")

_FORMAT = "[%(name)s] %(message)s"
_progress_enabled = True


def setup_logging(verbosity: int = 0) -> None:
    """
    Install one stderr handler on the root logger.

    verbosity: -1 = quiet (WARNING, no progress bars), 0 = INFO, 1+ = DEBUG
    """
    global _progress_enabled

    if verbosity < 0:
        level = logging.WARNING
    elif verbosity == 0:
        level = logging.INFO
    else:
        level = logging.DEBUG

    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(_FORMAT))
    root.addHandler(handler)
    root.setLevel(level)

    # matplotlib and PIL are chatty at DEBUG
    for noisy in ("matplotlib", "PIL"):
        logging.getLogger(noisy).setLevel(max(level, logging.WARNING))

    _progress_enabled = verbosity >= 0


def progress(iterable: Iterable[T], desc: str, total: int | None = None) -> Iterable[T]:
    """tqdm bar on stderr, switched off by --quiet."""
    return tqdm(
        iterable,
        desc=desc,
        total=total,
        leave=False,
        disable=not _progress_enabled,
        dynamic_ncols=True,
    )
