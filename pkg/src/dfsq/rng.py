"""Counter-based random streams.

Sample batch ``b`` under seed ``s`` is always drawn from a Philox generator
keyed by ``(s, b)``, so a run split across workers reproduces the serial
stream exactly.
"""

import os

import numpy as np

BATCH_SIZE = 2**14


def batch_generator(seed, batch):
    """Philox generator for batch ``batch`` of stream ``seed``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(batch)])
    return np.random.Generator(np.random.Philox(ss))


def batch_sizes(count, batch_size=BATCH_SIZE):
    """Sizes of the consecutive batches making up ``count`` draws."""
    if count < 1:
        raise ValueError("count must be >= 1")
    full, rest = divmod(int(count), int(batch_size))
    return [batch_size] * full + ([rest] if rest else [])


def default_workers():
    """Worker count from ``DFSQ_THREADS``, else the machine parallelism."""
    env = os.environ.get("DFSQ_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1
