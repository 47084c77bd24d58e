"""Row-block parallelism with a fixed partition.

Blocks are cut independently of the thread count, and every block is
reduced on its own, so results are bit-identical for any number of workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")

THREADS_ENV = "SINKHORN_BRIDGE_THREADS"


def max_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def block_slices(n: int, block: int) -> list[slice]:
    return [slice(s, min(s + block, n)) for s in range(0, n, block)]


def map_blocks(fn: Callable[[slice], T], n: int, block: int) -> list[T]:
    """Apply ``fn`` to consecutive row slices of ``range(n)``, in order."""
    slices = block_slices(n, block)
    workers = min(max_threads(), len(slices))
    if workers <= 1:
        return [fn(s) for s in slices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, slices))
