"""Deterministic hashing and random-stream derivation.

Every stochastic component draws from a stream derived from the master
seed and a stable label path, so results never depend on call order or
on how work is batched.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def mix64(x: np.ndarray | int) -> np.ndarray | np.uint64:
    """SplitMix64 finalizer; accepts scalars or uint64 arrays."""
    with np.errstate(over="ignore"):
        z = (np.uint64(x) + _GAMMA) & _MASK64
        z = ((z ^ (z >> np.uint64(30))) * _MIX1) & _MASK64
        z = ((z ^ (z >> np.uint64(27))) * _MIX2) & _MASK64
        return z ^ (z >> np.uint64(31))


def hash_labels(*labels: int | str) -> int:
    """Stable 128-bit integer digest of a label path."""
    h = hashlib.sha256()
    for lab in labels:
        h.update(repr(lab).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:16], "little")


def derive_rng(master_seed: int, *labels: int | str) -> np.random.Generator:
    """Independent generator for (master seed, label path)."""
    ss = np.random.SeedSequence(entropy=(int(master_seed) & (2**64 - 1), hash_labels(*labels)))
    return np.random.Generator(np.random.PCG64(ss))
