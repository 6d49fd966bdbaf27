"""Random instances: uniform members or noisy copies of a hidden center."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .perm import Instance, InvalidInputError, Permutation
from .rng import make_rng


def random_permutation(rng: np.random.Generator, n: int) -> Permutation:
    return Permutation(tuple(int(v) for v in rng.permutation(n) + 1))


def random_weights(rng: np.random.Generator, n: int, integral: bool = False) -> tuple:
    if integral:
        return tuple(float(v) for v in rng.integers(1, 6, size=n))
    return tuple(float(v) for v in rng.uniform(0.1, 3.0, size=n))


def uniform_instance(n: int, m: int, seed: int, weights: bool = False) -> Instance:
    if n < 1 or m < 1:
        raise InvalidInputError("n and m must be >= 1")
    rng = make_rng(seed, "uniform", n, m)
    perms = tuple(random_permutation(rng, n) for _ in range(m))
    w = random_weights(make_rng(seed, "weights", n), n) if weights else None
    return Instance(perms, w)


def move(seq: Sequence[int], src: int, dst: int) -> list:
    """Take the element at index ``src`` out and reinsert it at index ``dst``."""
    out = list(seq)
    e = out.pop(src)
    out.insert(dst, e)
    return out


@dataclass(frozen=True)
class Planted:
    instance: Instance
    center: Permutation
    moves: int


def planted_instance(n: int, m: int, moves: int, seed: int, weights: bool = False) -> Planted:
    """A uniform center and m members, each after ``moves`` random element moves."""
    if n < 1 or m < 1:
        raise InvalidInputError("n and m must be >= 1")
    if moves < 0:
        raise InvalidInputError("the number of moves must be >= 0")
    rng = make_rng(seed, "planted", n, m, moves)
    center = random_permutation(rng, n)
    perms = []
    for _ in range(m):
        seq = list(center.forward)
        for _ in range(moves):
            seq = move(seq, int(rng.integers(n)), int(rng.integers(n)))
        perms.append(Permutation(tuple(seq)))
    w = random_weights(make_rng(seed, "weights", n), n) if weights else None
    return Planted(Instance(tuple(perms), w), center, moves)


def sidecar(planted: Planted, seed: Optional[int]) -> dict:
    return {"model": "planted", "center": list(planted.center.forward), "moves": planted.moves, "seed": seed}
