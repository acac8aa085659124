"""Seeded random substreams.

Every random draw in the library comes from a generator derived from an
integer seed and a stream name, so that independent parts of an experiment
never share (or accidentally reuse) a PRNG stream.
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, *names) -> int:
    """Hash ``seed`` and a path of stream names into a 64-bit seed."""
    h = hashlib.blake2b(digest_size=8)
    h.update((int(seed) % 2**64).to_bytes(8, "little"))
    for name in names:
        h.update(b"/")
        h.update(str(name).encode())
    return int.from_bytes(h.digest(), "little")


def substream(seed: int, *names) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *names)))


def as_generator(seed) -> np.random.Generator:
    """Accept an int seed or an existing generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return substream(int(seed))
