"""Deterministic randomness.

Every random choice derives from one 64-bit seed plus a fixed label path, so
a component can be re-run (or run on another simulated machine) and draw
exactly the same values.
"""

from __future__ import annotations

import hashlib
import secrets
import struct

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(seed: int, *labels: object) -> int:
    """Hash ``seed`` and a label path into a fresh 64-bit seed."""
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<Q", seed & MASK64))
    for label in labels:
        h.update(b"\x1f")
        h.update(repr(label).encode())
    return int.from_bytes(h.digest(), "little")


def make_rng(seed: int, *labels: object) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *labels)))


def entropy_seed() -> int:
    return secrets.randbits(64)


class SeededPermutation:
    """A keyed pseudo-random bijection on ``0..size-1``.

    Four-round balanced Feistel network over the smallest even-width bit
    domain covering ``size``, with cycle walking back into range.  Any holder
    of ``(seed, size)`` evaluates it pointwise without seeing other values,
    which is what lets distributed machines agree on pivot priorities.
    """

    ROUNDS = 4

    def __init__(self, seed: int, size: int) -> None:
        if size < 1:
            raise ValueError("size must be >= 1")
        self.size = size
        half = 1
        while (1 << (2 * half)) < size:
            half += 1
        self._half = half
        self._mask = (1 << half) - 1
        self._keys = [derive_seed(seed, "feistel", size, r) for r in range(self.ROUNDS)]

    def _round(self, key: int, value: int) -> int:
        h = hashlib.blake2b(struct.pack("<QQ", key, value), digest_size=8)
        return int.from_bytes(h.digest(), "little") & self._mask

    def _encrypt(self, x: int) -> int:
        left, right = x >> self._half, x & self._mask
        for key in self._keys:
            left, right = right, left ^ self._round(key, right)
        return (left << self._half) | right

    def __call__(self, x: int) -> int:
        if not 0 <= x < self.size:
            raise ValueError(f"{x} outside 0..{self.size - 1}")
        y = self._encrypt(x)
        while y >= self.size:
            y = self._encrypt(y)
        return y
