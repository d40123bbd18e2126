from __future__ import annotations

import pytest

from core.overseer import Overseer


def _square(n: int) -> int:
    return n * n


def _explode(n: int) -> int:
    if n == 3:
        raise RuntimeError("task 3 failed")
    return n


def test_inline_run_keeps_task_order():
    assert Overseer(1).run(_square, [3, 1, 2]) == [9, 1, 4]


def test_worker_processes_keep_task_order():
    tasks = list(range(12))[::-1]
    assert Overseer(2, "squares").run(_square, tasks) == [n * n for n in tasks]


def test_no_tasks():
    assert Overseer(4).run(_square, []) == []


def test_task_errors_propagate():
    with pytest.raises(RuntimeError, match="task 3"):
        Overseer(2).run(_explode, range(5))


def test_jobs_must_be_positive():
    with pytest.raises(ValueError):
        Overseer(0)
