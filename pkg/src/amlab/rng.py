"""Seed handling and replica stream derivation."""
from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(value: int) -> int:
    """One SplitMix64 output for the 64-bit state ``value``."""
    z = (value + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def stream_seed(master_seed: int, k: int) -> int:
    """Seed of replica ``k``: ``splitmix64(master_seed XOR splitmix64(k))``."""
    return splitmix64((int(master_seed) & _MASK) ^ splitmix64(int(k) & _MASK))


def replica_seeds(master_seed: int, n_replicas: int) -> list[int]:
    return [stream_seed(master_seed, k) for k in range(n_replicas)]


def as_generator(rng):
    """Accept a ``numpy.random.Generator``, an integer seed or ``None``.

    Returns ``(generator, seed)`` where ``seed`` is the integer used, if any.
    """
    if isinstance(rng, np.random.Generator):
        return rng, None
    if rng is None or isinstance(rng, (int, np.integer)):
        seed = None if rng is None else int(rng)
        return np.random.default_rng(seed), seed
    # duck-typed generators (e.g. scripted draws in tests)
    return rng, None
