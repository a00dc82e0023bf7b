"""Counter-based random streams.

A stream is addressed by a master seed plus a tuple of non-negative integer
indices (path index, chunk index, sweep cell, ...). The indices become the
``spawn_key`` of a :class:`numpy.random.SeedSequence`, which keys a Philox
generator. Draw ``i`` of stream ``(seed, *indices)`` is therefore fixed no
matter which worker consumes the stream or in what order streams are opened.
"""

from __future__ import annotations

import numpy as np

SEED_MASK = (1 << 64) - 1


def stream(seed: int, *indices: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=tuple(int(i) for i in indices))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *indices: int) -> int:
    """A 64-bit child seed, used to hand independent seeds to sweep cells."""
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=tuple(int(i) for i in indices))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
