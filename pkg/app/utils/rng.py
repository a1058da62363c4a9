"""
Counter-based random streams.

Every stochastic quantity in the lab is drawn from a stream keyed by
(root seed, stream index). Philox is counter based, so the stream for a given
key never depends on which worker asked for it or in what order.
"""

from typing import Iterable, List, Sequence

import numpy as np


def stream(seed: int, index: int = 0, *extra: int) -> np.random.Generator:
    """
    Generator for the stream (seed, index, *extra).

    Args:
        seed: root seed from the experiment config
        index: replicate or chunk counter
        extra: further key components (e.g. a purpose tag)

    Returns:
        Independent numpy Generator
    """
    if seed < 0 or index < 0:
        raise ValueError("seed and stream index must be nonnegative")
    key = (int(index),) + tuple(int(e) for e in extra)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=key)))


def streams(seed: int, indices: Iterable[int], *extra: int) -> List[np.random.Generator]:
    """One generator per index, all under the same root seed"""
    return [stream(seed, i, *extra) for i in indices]


def chunk_bounds(n_items: int, chunk_size: int) -> List[Sequence[int]]:
    """
    Fixed partition of ``range(n_items)`` into chunks.

    The partition depends only on the two sizes, so chunk streams are
    reproducible whatever the worker count.
    """
    if chunk_size <= 0:
        raise ValueError("chunk_size must be positive")
    return [range(lo, min(lo + chunk_size, n_items)) for lo in range(0, n_items, chunk_size)]
