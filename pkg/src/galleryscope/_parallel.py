"""Worker pool shared by frame rendering and batch prediction.

GSCOPE_THREADS caps the worker count (default: all cores). Work items carry
their own RNG state and results are collected in submission order, so the
output is bit-identical for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def worker_count() -> int:
    env = os.environ.get("GSCOPE_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"GSCOPE_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ValueError(f"GSCOPE_THREADS must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


def parallel_map(fn: Callable[[T], R], items: Sequence[T] | Iterable[T],
                 workers: int | None = None) -> list[R]:
    items = list(items)
    n = worker_count() if workers is None else workers
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
