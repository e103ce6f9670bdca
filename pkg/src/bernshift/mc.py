"""Seed-split Monte Carlo blocks.

Work is cut into fixed-size blocks; block i always draws from
``default_rng([seed, i])``.  Results are therefore independent of how many
workers run and in which order blocks finish.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

from .measure import block_rng

T = TypeVar("T")
DEFAULT_BLOCK = 1024


def block_sizes(total: int, block: int = DEFAULT_BLOCK) -> list[int]:
    full, rest = divmod(total, block)
    return [block] * full + ([rest] if rest else [])


def map_blocks(
    fn: Callable[[int, int, np.random.Generator], T],
    total: int,
    seed: int,
    block: int = DEFAULT_BLOCK,
    workers: int = 1,
) -> list[T]:
    """Call fn(block_index, size, rng) for each block; results in block order."""
    sizes = block_sizes(total, block)
    jobs = [(i, s) for i, s in enumerate(sizes)]
    if workers <= 1 or len(jobs) <= 1:
        return [fn(i, s, block_rng(seed, i)) for i, s in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(fn, i, s, block_rng(seed, i)) for i, s in jobs]
        return [f.result() for f in futs]


def quantiles(values: np.ndarray, axis: int = 0) -> dict:
    q = np.quantile(values, [0.25, 0.5, 0.75], axis=axis)
    return {"q25": q[0], "median": q[1], "q75": q[2]}
