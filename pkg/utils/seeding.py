"""Deterministic seeding: one counter-based stream per (replicate, particle)."""

from typing import List

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One SplitMix64 step: advance by the golden gamma and apply the finalizer."""
    z = (x + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_stream_seed(master: int, replicate: int, particle: int) -> int:
    """
    Derive the 64-bit key of one random stream.

    Args:
        master: Campaign master seed
        replicate: Replicate index
        particle: Particle index

    Returns:
        Unsigned 64-bit integer, identical on every platform
    """
    h = splitmix64(master & MASK64)
    h = splitmix64(h ^ (replicate & MASK64))
    return splitmix64(h ^ (particle & MASK64))


def stream_generator(key: int) -> np.random.Generator:
    """Philox generator keyed directly by ``key`` (counter starts at zero)."""
    return np.random.Generator(np.random.Philox(key=key & MASK64))


def particle_generators(master: int, replicate: int, n_particles: int) -> List[np.random.Generator]:
    return [stream_generator(derive_stream_seed(master, replicate, p)) for p in range(n_particles)]
