"""Worker pool for the data-parallel phases of the kernels.

Every kernel splits its index space into contiguous chunks, runs one task per
chunk and concatenates the per-chunk results in chunk order.  The result is
therefore independent of how many workers execute the chunks.  numpy releases
the GIL inside its inner loops, so threads are enough.
"""

from __future__ import annotations

import os
import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Callable, Iterator, TypeVar

T = TypeVar("T")

# Below this many elements a phase runs inline; tests lower it to force chunking.
MIN_CHUNK = 1 << 16

_state = threading.local()
_default_workers = os.cpu_count() or 1
_pools: dict[int, ThreadPoolExecutor] = {}
_pools_lock = threading.Lock()


def max_workers() -> int:
    return os.cpu_count() or 1


def get_workers() -> int:
    return getattr(_state, "workers", _default_workers)


def set_workers(n: int) -> None:
    """Set the worker count for the calling thread."""
    if n < 1:
        raise ValueError(f"worker count must be >= 1, got {n}")
    _state.workers = n


@contextmanager
def workers(n: int) -> Iterator[None]:
    previous = get_workers()
    set_workers(n)
    try:
        yield
    finally:
        set_workers(previous)


def _pool(n: int) -> ThreadPoolExecutor:
    with _pools_lock:
        pool = _pools.get(n)
        if pool is None:
            pool = _pools[n] = ThreadPoolExecutor(max_workers=n, thread_name_prefix="dsmlog")
        return pool


def chunk_bounds(n: int, min_chunk: int | None = None) -> list[tuple[int, int]]:
    """Split ``range(n)`` into at most ``get_workers()`` contiguous pieces."""
    min_chunk = MIN_CHUNK if min_chunk is None else min_chunk
    if n <= 0:
        return [(0, 0)]
    pieces = max(1, min(get_workers(), -(-n // max(min_chunk, 1))))
    step = -(-n // pieces)
    return [(lo, min(lo + step, n)) for lo in range(0, n, step)]


def map_chunks(fn: Callable[[int, int], T], n: int) -> list[T]:
    """Run ``fn(lo, hi)`` over the chunks of ``range(n)``; results in chunk order."""
    bounds = chunk_bounds(n)
    if len(bounds) == 1:
        return [fn(*bounds[0])]
    return list(_pool(get_workers()).map(lambda b: fn(*b), bounds))
