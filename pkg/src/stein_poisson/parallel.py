"""Order-preserving replication map."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")

THREADS_ENV = "STEIN_POISSON_THREADS"


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def ordered_map(func: Callable[[int], T], indices: Iterable[int], threads: int | None = None) -> list[T]:
    """Apply ``func`` to each index; results come back in index order whatever ``threads`` is."""
    threads = default_threads() if threads is None else max(1, int(threads))
    idx = list(indices)
    if threads == 1 or len(idx) < 2:
        return [func(i) for i in idx]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, idx, chunksize=1))
