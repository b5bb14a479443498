"""Chunked, order-preserving evaluation over point arrays.

Chunk boundaries are fixed by ``CHUNK`` and never by the worker count, so
results are bit-identical for any number of threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 8192
_threads = 1


def set_threads(n: int) -> None:
    global _threads
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _threads = int(n)


def get_threads() -> int:
    return _threads


def chunked_map(fn, *arrays, chunk: int = CHUNK):
    """Apply ``fn`` to aligned slices of 1-d ``arrays`` and concatenate.

    ``fn`` returns a tuple of arrays (or objects exposing ``concatenate``
    via :func:`_concat`).  Results are assembled in slice order.
    """
    n = len(arrays[0])
    bounds = [(i, min(i + chunk, n)) for i in range(0, n, chunk)] or [(0, 0)]
    jobs = [tuple(a[lo:hi] for a in arrays) for lo, hi in bounds]
    if _threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=_threads) as pool:
            parts = list(pool.map(lambda args: fn(*args), jobs))
    else:
        parts = [fn(*args) for args in jobs]
    if len(parts) == 1:
        return parts[0]
    return tuple(_concat([p[i] for p in parts]) for i in range(len(parts[0])))


def _concat(items):
    first = items[0]
    if isinstance(first, np.ndarray):
        return np.concatenate(items)
    return type(first).concatenate(items)
