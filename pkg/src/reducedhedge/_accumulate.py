"""Path-block streaming with an associative merge of partial sums."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

MODES = ("pairwise", "sequential")


def path_blocks(n_paths: int, block_size: int) -> list[tuple[int, int]]:
    if block_size < 1:
        raise ValueError("block_size must be positive")
    return [(s, min(s + block_size, n_paths)) for s in range(0, n_paths, block_size)]


def _add(x: Sequence[np.ndarray], y: Sequence[np.ndarray]) -> tuple:
    return tuple(a + b for a, b in zip(x, y))


def stream_sum(fn: Callable[[int, int], tuple], n_paths: int, block_size: int = 2048,
               mode: str = "pairwise", threads: int = 1) -> tuple:
    """Sum ``fn(start, stop)`` over fixed path blocks.

    Block boundaries depend only on ``block_size`` and the merge order only on
    ``mode``, so the result is bitwise identical for any ``threads``.
    ``pairwise`` merges as a balanced tree; ``sequential`` folds left to right.
    """
    if mode not in MODES:
        raise ValueError(f"unknown accumulation mode {mode!r}; expected one of {MODES}")
    blocks = path_blocks(n_paths, block_size)
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda se: fn(*se), blocks))
    else:
        parts = [fn(s, e) for s, e in blocks]
    if mode == "sequential":
        total = parts[0]
        for p in parts[1:]:
            total = _add(total, p)
        return total
    while len(parts) > 1:
        merged = [_add(parts[k], parts[k + 1]) for k in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    return parts[0]
