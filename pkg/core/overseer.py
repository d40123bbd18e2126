"""
core.overseer
~~~~~~~~~~~~~
Overseer fans independent tasks (folds) out over ``jobs`` worker
processes (joblib, loky backend) and hands the results back in task order.

jobs == 1 runs everything inline in this process, which keeps
single-threaded runs bitwise reproducible and easy to debug.
"""

from __future__ import annotations

import logging
from typing import Callable, Sequence, TypeVar

from joblib import Parallel, delayed

from core.logs import progress

log = logging.getLogger("OVERSEER")

T = TypeVar("T")
R = TypeVar("R")


class Overseer:

    def __init__(self, jobs: int = 1, label: str = "tasks"):
        if jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {jobs}")
        self._jobs  = jobs
        self._label = label

    @property
    def jobs(self) -> int:
        return self._jobs

    # ── Dispatch ──────────────────────────────────────────────────────────────

    def run(self, fn: Callable[[T], R], tasks: Sequence[T]) -> list[R]:
        """
        fn(task) for every task; results in task order. *fn* must be a
        module-level function so worker processes can import it.
        The first exception raised by a task propagates.
        """
        tasks = list(tasks)
        if not tasks:
            return []

        workers = min(self._jobs, len(tasks))
        if workers == 1:
            log.debug(f"{self._label}: running {len(tasks)} task(s) inline")
            return [fn(task) for task in progress(tasks, desc=self._label)]

        log.info(f"{self._label}: launching {len(tasks)} task(s) on {workers} worker(s)")
        parallel = Parallel(n_jobs=workers, return_as="generator")
        ordered = parallel(delayed(fn)(task) for task in tasks)
        results = list(progress(ordered, desc=self._label, total=len(tasks)))
        log.debug(f"{self._label}: {len(results)} task(s) finished")
        return results
