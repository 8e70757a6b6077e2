"""Deterministic chunked work distribution.

Monte Carlo work is split into fixed-size chunks. Chunk ``c`` of a run with
master seed ``s`` always draws from ``default_rng([s, c])``, so the numbers a
chunk produces do not depend on which worker executes it or how many workers
exist. Results are gathered in chunk order before any reduction.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, TypeVar

import numpy as np

CHUNK_SIZE = 4096
WORKERS_ENV = "QTHERMO_WORKERS"

T = TypeVar("T")


def resolve_workers(workers: Optional[int] = None) -> int:
    """Explicit value, else ``$QTHERMO_WORKERS``, else 1."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else 1
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    return workers


def chunk_bounds(n: int, chunk_size: int = CHUNK_SIZE) -> List[tuple]:
    return [(start, min(start + chunk_size, n)) for start in range(0, n, chunk_size)]


def chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.default_rng([seed, chunk_index])


def map_chunks(
    fn: Callable[[int, int, int], T],
    n: int,
    workers: Optional[int] = None,
    chunk_size: int = CHUNK_SIZE,
) -> List[T]:
    """Call ``fn(chunk_index, start, stop)`` for every chunk, results in chunk order."""
    bounds = chunk_bounds(n, chunk_size)
    workers = resolve_workers(workers)
    if workers == 1 or len(bounds) <= 1:
        return [fn(i, a, b) for i, (a, b) in enumerate(bounds)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, i, a, b) for i, (a, b) in enumerate(bounds)]
        return [f.result() for f in futures]
