"""Reproducible random streams for parallel Monte Carlo.

Every replicate owns a Philox-4x64 counter-based generator.  The 128-bit key
is derived from the master seed; replicate ``i`` starts its counter at
``i * 2**128`` (third counter word), so streams never overlap for fewer than
``2**128`` draws per replicate and do not depend on how replicates are
scheduled over threads.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["split", "stream_key"]

_MASK64 = (1 << 64) - 1


@lru_cache(maxsize=64)
def stream_key(master_seed: int) -> tuple[int, int]:
    if not 0 <= master_seed <= _MASK64:
        raise ValueError(f"master seed must be a 64-bit unsigned integer, got {master_seed}")
    k0, k1 = np.random.SeedSequence(master_seed).generate_state(2, np.uint64)
    return int(k0), int(k1)


def split(master_seed: int, index: int) -> np.random.Philox:
    """Bit generator of replicate ``index`` under ``master_seed``."""
    if not 0 <= index <= _MASK64:
        raise ValueError(f"replicate index must be a 64-bit unsigned integer, got {index}")
    key = np.array(stream_key(int(master_seed)), dtype=np.uint64)
    counter = np.array([0, 0, index, 0], dtype=np.uint64)
    return np.random.Philox(key=key, counter=counter)
