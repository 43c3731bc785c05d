"""Counter-based random streams for reproducible, parallel-safe paths.

Path ``i`` of a run with seed ``s`` draws from ``Philox(key=[s, i])``.
Keyed streams never overlap, so paths can be generated in any order, in
chunks, or on different workers and still produce identical numbers.

The draw layout within one path stream is fixed:

1. optional initial-condition draws (hidden state, ``n - 1`` normals),
2. the path's increments, one ``standard_normal((n_steps, width))`` call
   (row major: all coordinates of step 0, then step 1, ...).

Changing the bit generator or this layout changes every simulated number
in the package and is treated as a breaking change.
"""

import os

import numpy as np


def path_generator(seed: int, path_index: int) -> np.random.Generator:
    """Independent generator for one simulated path."""
    key = np.array([seed, path_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def worker_count() -> int:
    """Worker cap from the HETBELIEF_THREADS environment variable (default 1)."""
    raw = os.environ.get("HETBELIEF_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def chunk_size(n_steps: int, width: int = 1, cap_bytes: int = 1 << 28) -> int:
    """Paths per chunk so one chunk's increment block stays under cap_bytes."""
    per_path = max(1, n_steps) * max(1, width) * 8
    return max(1, min(4096, cap_bytes // per_path))


def map_chunks(fn, n_paths: int, chunk: int) -> list:
    """Evaluate fn(lo, hi) over path chunks, fanned out across workers.

    Results come back in chunk order no matter how many workers ran, and
    each chunk derives its randomness from the per-path streams, so the
    combined output is byte-identical for any HETBELIEF_THREADS setting.
    """
    ranges = [(lo, min(lo + chunk, n_paths)) for lo in range(0, n_paths, chunk)]
    workers = min(worker_count(), len(ranges))
    if workers <= 1:
        return [fn(lo, hi) for lo, hi in ranges]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, lo, hi) for lo, hi in ranges]
        return [f.result() for f in futures]
