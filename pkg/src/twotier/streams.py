"""Seeded random streams for reproducible, thread-count independent sampling.

Replications are grouped into fixed-size blocks.  Every (block, constituency)
pair owns an independent Philox stream keyed by the master seed, so the
draws of a replication never depend on how blocks are scheduled over
threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

BLOCK_SIZE = 4096


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``."""
    if seed is None:
        raise ValueError("an explicit seed is required")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def blocks(replications: int, block_size: int = BLOCK_SIZE) -> list[tuple[int, int]]:
    """(block index, block length) pairs covering ``replications``."""
    if replications < 1:
        raise ValueError("replications must be positive")
    full, rem = divmod(int(replications), block_size)
    out = [(b, block_size) for b in range(full)]
    if rem:
        out.append((full, rem))
    return out


def run_blocks(
    fn: Callable[[int, int], np.ndarray],
    replications: int,
    threads: int = 1,
    block_size: int = BLOCK_SIZE,
) -> np.ndarray:
    """Sum ``fn(block, size)`` over all blocks.

    ``fn`` must return integer arrays; integer addition keeps the total
    independent of evaluation order.
    """
    work = blocks(replications, block_size)
    if threads <= 1 or len(work) == 1:
        parts = [fn(b, n) for b, n in work]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda bn: fn(*bn), work))
    total = parts[0].copy()
    for p in parts[1:]:
        total += p
    return total


def derive_seed(seed: int, *key: int) -> int:
    """Child seed for a sub-experiment identified by ``key``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
