"""Reproducible random streams.

Streams are numpy ``Philox`` (counter-based) generators keyed through
``SeedSequence(seed, spawn_key=(tag, index))``. Batched simulations split the
replicate range into fixed-size blocks; block ``k`` covers replicates
``[k*BLOCK_SIZE, (k+1)*BLOCK_SIZE)`` and owns its own stream, so the set of
samples never depends on how blocks are spread across shards.
"""

from __future__ import annotations

import numpy as np

BLOCK_SIZE = 1024

# spawn-key tags so unrelated experiments with the same seed never share a stream
TAG_BARY = 1
TAG_LINEAR = 2
TAG_COUPLE = 3
TAG_URN = 4
TAG_TOLL = 5
TAG_MISC = 9


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def blocks(samples: int, block_size: int = BLOCK_SIZE) -> list[tuple[int, int, int]]:
    """``(block_index, start, stop)`` covering ``range(samples)``."""
    return [(k, lo, min(lo + block_size, samples))
            for k, lo in enumerate(range(0, samples, block_size))]


def shard_blocks(samples: int, shards: int, block_size: int = BLOCK_SIZE) -> list[list[tuple[int, int, int]]]:
    """Contiguous runs of blocks per shard, in shard order."""
    if shards < 1:
        raise ValueError("shards must be >= 1")
    all_blocks = blocks(samples, block_size)
    per = -(-len(all_blocks) // shards) if all_blocks else 0
    return [all_blocks[i * per:(i + 1) * per] for i in range(shards)]
