"""Seeded random streams.

Every stochastic component receives an explicit ``numpy.random.Generator``.
Independent streams are derived from a master seed plus an integer key path,
so a replication's randomness depends only on *which* replication it is and
never on execution order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_int(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream keys must be non-negative")
        return int(part)
    digest = hashlib.sha256(str(part).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def stream(master_seed: int, *key) -> np.random.Generator:
    """Return the generator for ``(master_seed, *key)``.

    String key parts are hashed to 64-bit integers, so ``stream(7, 15, "panel")``
    is stable across runs and platforms.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(_key_int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
