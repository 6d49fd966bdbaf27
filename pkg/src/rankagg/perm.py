"""Permutations, instances and exact distance kernels.

Elements are 1-based everywhere in the public API: a permutation of size
``n`` is a sequence holding each of ``1..n`` once, read in one-line notation
(``forward[i]`` is the element at position ``i``).  Positions are 0-based
when returned by :meth:`Permutation.position`.
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence, Tuple

from .fenwick import FenwickCounter, FenwickMax, FenwickTree

WEIGHT_TOL = 1e-9

Weights = Tuple[float, ...]


class InvalidInputError(ValueError):
    """Raised for malformed permutations, dimension mismatches and bad weights."""


class InstanceFormatError(InvalidInputError):
    """Parse failure in an instance file, with a 1-based line and column."""

    def __init__(self, line: int, column: int, message: str) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Permutation:
    forward: Tuple[int, ...]
    inverse: Tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        fwd = tuple(int(v) for v in self.forward)
        n = len(fwd)
        if n < 1:
            raise InvalidInputError("a permutation needs n >= 1")
        inv = [-1] * n
        for pos, e in enumerate(fwd):
            if not 1 <= e <= n:
                raise InvalidInputError(f"element {e} outside 1..{n}")
            if inv[e - 1] != -1:
                raise InvalidInputError(f"element {e} repeated")
            inv[e - 1] = pos
        object.__setattr__(self, "forward", fwd)
        object.__setattr__(self, "inverse", tuple(inv))

    @property
    def n(self) -> int:
        return len(self.forward)

    def __len__(self) -> int:
        return len(self.forward)

    def __iter__(self) -> Iterator[int]:
        return iter(self.forward)

    def __getitem__(self, pos: int) -> int:
        return self.forward[pos]

    def position(self, element: int) -> int:
        """0-based position of ``element``."""
        return self.inverse[element - 1]

    def __str__(self) -> str:
        return " ".join(map(str, self.forward))

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(1, n + 1)))

    @classmethod
    def reverse(cls, n: int) -> "Permutation":
        return cls(tuple(range(n, 0, -1)))

    @classmethod
    def parse(cls, text: str) -> "Permutation":
        return cls(tuple(int(tok) for tok in text.split()))


def as_weights(w: Optional[Iterable[float]], n: int) -> Optional[Weights]:
    """Validate a weight vector (``w[e-1]`` is the weight of element ``e``)."""
    if w is None:
        return None
    vals = tuple(float(x) for x in w)
    if len(vals) != n:
        raise InvalidInputError(f"weight vector has length {len(vals)}, expected {n}")
    if any(not x >= 0 for x in vals):
        raise InvalidInputError("weights must be nonnegative")
    return vals


def _check_pair(p: Permutation, q: Permutation) -> int:
    if p.n != q.n:
        raise InvalidInputError(f"dimension mismatch: {p.n} vs {q.n}")
    return p.n


class Metric(str, enum.Enum):
    HAMMING = "hamming"
    WEIGHTED_HAMMING = "weighted-hamming"
    FOOTRULE = "footrule"
    KENDALL = "kendall"
    WEIGHTED_KENDALL = "weighted-kendall"
    ULAM = "ulam"
    WEIGHTED_ULAM = "weighted-ulam"

    @property
    def weighted(self) -> bool:
        return self.value.startswith("weighted-")

    @property
    def family(self) -> str:
        """The unweighted base name: hamming, footrule, kendall or ulam."""
        return self.value.removeprefix("weighted-")

    @classmethod
    def parse(cls, name: str) -> "Metric":
        try:
            return cls(name.lower().replace("_", "-"))
        except ValueError:
            raise InvalidInputError(f"unknown metric {name!r}") from None


@dataclass(frozen=True)
class Instance:
    perms: Tuple[Permutation, ...]
    weights: Optional[Weights] = None

    def __post_init__(self) -> None:
        perms = tuple(p if isinstance(p, Permutation) else Permutation(tuple(p)) for p in self.perms)
        if not perms:
            raise InvalidInputError("an instance needs m >= 1 permutations")
        n = perms[0].n
        if any(p.n != n for p in perms):
            raise InvalidInputError("all permutations must share n")
        object.__setattr__(self, "perms", perms)
        object.__setattr__(self, "weights", as_weights(self.weights, n))

    @property
    def n(self) -> int:
        return self.perms[0].n

    @property
    def m(self) -> int:
        return len(self.perms)

    def __len__(self) -> int:
        return len(self.perms)

    def __iter__(self) -> Iterator[Permutation]:
        return iter(self.perms)

    def __getitem__(self, i: int) -> Permutation:
        return self.perms[i]

    def subset(self, indices: Iterable[int]) -> "Instance":
        return Instance(tuple(self.perms[i] for i in indices), self.weights)

    def weights_for(self, metric: Metric) -> Optional[Weights]:
        """Weights to pass to a kernel, or an error when a weighted metric lacks them."""
        if not metric.weighted:
            return None
        if self.weights is None:
            raise InvalidInputError(f"metric {metric.value} requires instance weights")
        return self.weights

    # text format ---------------------------------------------------------

    def to_text(self) -> str:
        lines = [f"{self.n} {self.m}"]
        lines.extend(str(p) for p in self.perms)
        if self.weights is not None:
            lines.append("w " + " ".join(repr(x) for x in self.weights))
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "Instance":
        return parse_instance(text)

    @classmethod
    def read(cls, path: str | Path) -> "Instance":
        return parse_instance(Path(path).read_text())

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())


def _tokens(line: str) -> list[tuple[int, str]]:
    """Split a line into (1-based column, token) pairs."""
    out = []
    i = 0
    while i < len(line):
        if line[i].isspace():
            i += 1
            continue
        j = i
        while j < len(line) and not line[j].isspace():
            j += 1
        out.append((i + 1, line[i:j]))
        i = j
    return out


def _int_token(lineno: int, col: int, tok: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise InstanceFormatError(lineno, col, f"expected an integer, got {tok!r}") from None


def parse_instance(text: str) -> Instance:
    """Parse the ``n m`` / permutation lines / optional ``w ...`` format."""
    rows = [(i + 1, _tokens(line)) for i, line in enumerate(text.splitlines())]
    rows = [(ln, toks) for ln, toks in rows if toks]
    if not rows:
        raise InstanceFormatError(1, 1, "empty instance")
    ln, head = rows[0]
    if len(head) != 2:
        raise InstanceFormatError(ln, head[0][0], "header must be 'n m'")
    n = _int_token(ln, *head[0])
    m = _int_token(ln, *head[1])
    if n < 1:
        raise InstanceFormatError(ln, head[0][0], "n must be >= 1")
    if m < 1:
        raise InstanceFormatError(ln, head[1][0], "m must be >= 1")
    body = rows[1:]
    if len(body) < m:
        last = body[-1][0] if body else ln
        raise InstanceFormatError(last + 1, 1, f"expected {m} permutation lines, found {len(body)}")
    perms = []
    for ln, toks in body[:m]:
        if toks[0][1] == "w":
            raise InstanceFormatError(ln, toks[0][0], f"weight line before all {m} permutations")
        if len(toks) != n:
            col = toks[n][0] if len(toks) > n else toks[-1][0] + len(toks[-1][1])
            raise InstanceFormatError(ln, col, f"expected {n} elements, found {len(toks)}")
        seen: set[int] = set()
        vals = []
        for col, tok in toks:
            v = _int_token(ln, col, tok)
            if not 1 <= v <= n:
                raise InstanceFormatError(ln, col, f"element {v} outside 1..{n}")
            if v in seen:
                raise InstanceFormatError(ln, col, f"element {v} repeated")
            seen.add(v)
            vals.append(v)
        perms.append(Permutation(tuple(vals)))
    weights = None
    rest = body[m:]
    if rest:
        ln, toks = rest[0]
        if toks[0][1] != "w":
            raise InstanceFormatError(ln, toks[0][0], "unexpected line after permutations")
        if len(toks) - 1 != n:
            raise InstanceFormatError(ln, toks[-1][0], f"expected {n} weights, found {len(toks) - 1}")
        weights = []
        for col, tok in toks[1:]:
            try:
                x = float(tok)
            except ValueError:
                raise InstanceFormatError(ln, col, f"expected a number, got {tok!r}") from None
            if not x >= 0:
                raise InstanceFormatError(ln, col, "weights must be nonnegative")
            weights.append(x)
        if len(rest) > 1:
            ln, toks = rest[1]
            raise InstanceFormatError(ln, toks[0][0], "trailing content after weight line")
    return Instance(tuple(perms), None if weights is None else tuple(weights))


# distance kernels ------------------------------------------------------


def hamming(p: Permutation, q: Permutation, w: Optional[Sequence[float]] = None) -> float:
    n = _check_pair(p, q)
    if w is None:
        return sum(1 for a, b in zip(p.forward, q.forward) if a != b)
    w = as_weights(w, n)
    return sum((w[a - 1] + w[b - 1]) / 2 for a, b in zip(p.forward, q.forward) if a != b)


def footrule(p: Permutation, q: Permutation) -> int:
    _check_pair(p, q)
    return sum(abs(a - b) for a, b in zip(p.forward, q.forward))


def relabel(p: Permutation, q: Permutation) -> list[int]:
    """``q`` rewritten in the coordinates of ``p``: entry k is the position in p of q[k]."""
    inv = p.inverse
    return [inv[e - 1] for e in q.forward]


def kendall(p: Permutation, q: Permutation, w: Optional[Sequence[float]] = None) -> float:
    """Inversion count in O(n log n).

    After relabelling, an element pair is discordant exactly when it forms an
    inversion of the relabelled sequence.  Scanning left to right, the tree
    answers "how many (and how much weight) of the earlier entries are larger".
    """
    n = _check_pair(p, q)
    seq = relabel(p, q)
    counts = FenwickCounter(n)
    if w is None:
        inversions = 0
        for seen, v in enumerate(seq):
            inversions += seen - counts.prefix(v)
            counts.add(v)
        return inversions
    w = as_weights(w, n)
    # weights stored at mirrored slots so "weight of larger entries" is a prefix
    # sum of those entries alone, never a difference that could leave rounding residue
    larger_sums = FenwickTree(n)
    total = 0.0
    for seen, (v, e) in enumerate(zip(seq, q.forward)):
        larger = seen - counts.prefix(v)
        if larger:
            total += (larger_sums.prefix(n - 2 - v) + larger * w[e - 1]) / 2
        counts.add(v)
        larger_sums.add(n - 1 - v, w[e - 1])
    return total


class UlamDistance(NamedTuple):
    moves: float
    indel: float


def longest_increasing(seq: Sequence[int]) -> int:
    """Length of the longest strictly increasing subsequence (patience sorting)."""
    tails: list[int] = []
    for v in seq:
        k = bisect.bisect_left(tails, v)
        if k == len(tails):
            tails.append(v)
        else:
            tails[k] = v
    return len(tails)


def heaviest_increasing(seq: Sequence[int], weights: Sequence[float]) -> Tuple[float, frozenset]:
    """Heaviest strictly increasing subsequence of a permutation of 0..n-1: (weight, its indices)."""
    tree = FenwickMax(len(seq))
    pred = [-1] * len(seq)
    best, last = 0.0, -1
    for k, (v, wt) in enumerate(zip(seq, weights)):
        value, pred[k] = tree.prefix_argmax(v - 1)
        cand = value + wt
        tree.update(v, cand, k)
        if cand > best:
            best, last = cand, k
    chain = set()
    while last != -1:
        chain.add(last)
        last = pred[last]
    return best, frozenset(chain)


def ulam(p: Permutation, q: Permutation, w: Optional[Sequence[float]] = None) -> UlamDistance:
    n = _check_pair(p, q)
    seq = relabel(p, q)
    if w is None:
        moves = n - longest_increasing(seq)
        return UlamDistance(moves, 2 * moves)
    w = as_weights(w, n)
    _, kept = heaviest_increasing(seq, [w[e - 1] for e in q.forward])
    # summing the dropped weights directly keeps d(p, p) exactly zero
    moves = sum(w[e - 1] for k, e in enumerate(q.forward) if k not in kept)
    return UlamDistance(moves, 2 * moves)


def distance(metric: Metric, p: Permutation, q: Permutation, w: Optional[Sequence[float]] = None) -> float:
    """Distance under ``metric``; Ulam metrics report the indel distance."""
    family = metric.family
    if metric.weighted and w is None:
        raise InvalidInputError(f"metric {metric.value} requires weights")
    w = w if metric.weighted else None
    if family == "hamming":
        return hamming(p, q, w)
    if family == "footrule":
        return footrule(p, q)
    if family == "kendall":
        return kendall(p, q, w)
    return ulam(p, q, w).indel


def cost(x: Permutation, P: Instance, metric: Metric) -> float:
    if x.n != P.n:
        raise InvalidInputError(f"dimension mismatch: {x.n} vs {P.n}")
    w = P.weights_for(metric)
    return sum(distance(metric, x, p, w) for p in P.perms) / P.m


# unaligned sets ----------------------------------------------------------


def canonical_alignment(x: Permutation, p: Permutation) -> frozenset[int]:
    """Elements matched by a fixed longest common subsequence of ``x`` and ``p``.

    Among all longest common subsequences this picks the one whose positions
    in ``p`` are lexicographically smallest.
    """
    n = _check_pair(x, p)
    # suffix[i][j] = LCS length of x[i:] and p[j:]
    suffix = [[0] * (n + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row, below = suffix[i], suffix[i + 1]
        xi = x.forward[i]
        for j in range(n - 1, -1, -1):
            if xi == p.forward[j]:
                row[j] = below[j + 1] + 1
            else:
                row[j] = max(below[j], row[j + 1])
    matched = []
    i = j = 0
    while suffix[i][j] > 0:
        target = suffix[i][j]
        for jj in range(j, n):
            ii = x.position(p.forward[jj])
            if ii >= i and suffix[ii + 1][jj + 1] == target - 1:
                matched.append(p.forward[jj])
                i, j = ii + 1, jj + 1
                break
    return frozenset(matched)


def unaligned_characters(x: Permutation, p: Permutation) -> frozenset[int]:
    aligned = canonical_alignment(x, p)
    return frozenset(e for e in x.forward if e not in aligned)


def unaligned_pairs(x: Permutation, p: Permutation) -> frozenset[tuple[int, int]]:
    """Element pairs (a < b) ordered differently by ``x`` and ``p``."""
    n = _check_pair(x, p)
    out = set()
    for a in range(1, n + 1):
        for b in range(a + 1, n + 1):
            if (x.position(a) < x.position(b)) != (p.position(a) < p.position(b)):
                out.add((a, b))
    return frozenset(out)
