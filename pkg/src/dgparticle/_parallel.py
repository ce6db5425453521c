"""Row-chunked evaluation helpers.

Every kernel in the package computes output rows independently, so splitting
rows into fixed-size chunks and farming them out to threads never changes the
floating point result. Reductions over rows happen afterwards, in one fixed
order, by the caller.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

THREADS_ENV = "DGPARTICLE_THREADS"

# entries per temporary block (rows * cols * dim); keeps temporaries ~32 MB
_BLOCK_ENTRIES = 4_000_000


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def row_chunks(n_rows: int, cols: int, dim: int = 1):
    step = max(1, _BLOCK_ENTRIES // max(1, cols * dim))
    return [(lo, min(lo + step, n_rows)) for lo in range(0, n_rows, step)]


def map_rows(fn, n_rows: int, cols: int, dim: int = 1) -> np.ndarray:
    """Evaluate ``fn(lo, hi)`` on row blocks and stack the results in order."""
    chunks = row_chunks(n_rows, cols, dim)
    threads = thread_count()
    if threads == 1 or len(chunks) == 1:
        parts = [fn(lo, hi) for lo, hi in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: fn(*c), chunks))
    return np.concatenate(parts, axis=0)
