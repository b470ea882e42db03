"""Deterministic data-parallel reductions.

Sums here are computed over a pairwise tree whose shape depends only on the
number of rows, never on the worker count. Workers evaluate disjoint
fixed-boundary blocks of that tree, so the result is bit-identical whether
the reduction runs on one thread or many.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._validation import check_workers

__all__ = ["pairwise_sum"]

# Leaf block of the reduction tree. Fixed: changing it changes rounding.
_BLOCK = 1024


def _combine(parts: list[np.ndarray]) -> np.ndarray:
    # Fold adjacent partials pairwise until one remains; a trailing odd
    # partial is carried to the next round unchanged.
    while len(parts) > 1:
        merged = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    return parts[0]


def pairwise_sum(values: np.ndarray, workers: int = 1) -> np.ndarray:
    """Sum ``values`` along axis 0 with a fixed-shape pairwise tree.

    Rows are grouped into consecutive blocks of ``_BLOCK`` leaves; block
    sums are combined pairwise in index order. ``workers`` only controls
    how many blocks are evaluated concurrently.
    """
    workers = check_workers(workers)
    a = np.asarray(values, dtype=np.float64)
    if a.shape[0] == 0:
        return np.zeros(a.shape[1:], dtype=np.float64)

    starts = range(0, a.shape[0], _BLOCK)
    if workers == 1 or a.shape[0] <= _BLOCK:
        blocks = [a[lo : lo + _BLOCK].sum(axis=0) for lo in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(lambda lo: a[lo : lo + _BLOCK].sum(axis=0), starts))
    return _combine(blocks)
