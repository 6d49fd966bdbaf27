"""Brute-force ground truth.

Everything here is deliberately literal: pair enumeration, quadratic LCS
tables, full enumeration of S_n and subset dynamic programs.  None of it
shares code with the fast kernels it is used to check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Hashable, NamedTuple, Optional, Sequence

import numpy as np

from .perm import Instance, InvalidInputError, Metric, Permutation


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleBudget:
    max_n: int = 8
    max_vertices: int = 14


DEFAULT_BUDGET = OracleBudget()


# pairwise distances -----------------------------------------------------


def naive_hamming(p: Sequence[int], q: Sequence[int], w: Optional[Sequence[float]] = None) -> float:
    total = 0.0
    for i in range(len(p)):
        if p[i] != q[i]:
            total += 1.0 if w is None else (w[p[i] - 1] + w[q[i] - 1]) / 2
    return total


def naive_footrule(p: Sequence[int], q: Sequence[int]) -> float:
    return float(sum(abs(p[i] - q[i]) for i in range(len(p))))


def naive_kendall(p: Sequence[int], q: Sequence[int], w: Optional[Sequence[float]] = None) -> float:
    n = len(p)
    pos_p = {e: i for i, e in enumerate(p)}
    pos_q = {e: i for i, e in enumerate(q)}
    total = 0.0
    for a in range(1, n + 1):
        for b in range(a + 1, n + 1):
            if (pos_p[a] < pos_p[b]) != (pos_q[a] < pos_q[b]):
                total += 1.0 if w is None else (w[a - 1] + w[b - 1]) / 2
    return total


def naive_lcs_weight(p: Sequence[int], q: Sequence[int], w: Optional[Sequence[float]] = None) -> float:
    """Heaviest common subsequence by the textbook quadratic table."""
    n, m = len(p), len(q)
    table = [[0.0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if p[i - 1] == q[j - 1]:
                gain = 1.0 if w is None else w[p[i - 1] - 1]
                table[i][j] = table[i - 1][j - 1] + gain
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[n][m]


def naive_ulam_moves(p: Sequence[int], q: Sequence[int], w: Optional[Sequence[float]] = None) -> float:
    total = float(len(p)) if w is None else float(sum(w))
    return total - naive_lcs_weight(p, q, w)


def naive_distance(metric: Metric, p: Permutation | Sequence[int], q: Permutation | Sequence[int],
                   w: Optional[Sequence[float]] = None) -> float:
    """Literal distance; Ulam metrics give the indel distance (twice the moves)."""
    p = tuple(p)
    q = tuple(q)
    if len(p) != len(q):
        raise InvalidInputError("dimension mismatch")
    w = w if metric.weighted else None
    family = metric.family
    if family == "hamming":
        return naive_hamming(p, q, w)
    if family == "footrule":
        return naive_footrule(p, q)
    if family == "kendall":
        return naive_kendall(p, q, w)
    return 2 * naive_ulam_moves(p, q, w)


# exact median ------------------------------------------------------------


@lru_cache(maxsize=16)
def all_permutations(n: int) -> np.ndarray:
    """All of S_n as rows, in lexicographic order."""
    return np.array(list(itertools.permutations(range(1, n + 1))), dtype=np.int64)


def _distances_to_all(X: np.ndarray, p: Sequence[int], metric: Metric,
                      w: Optional[np.ndarray]) -> np.ndarray:
    """Distance from every row of X to ``p``."""
    N, n = X.shape
    p = np.asarray(p, dtype=np.int64)
    family = metric.family
    if family == "hamming":
        diff = X != p[None, :]
        if w is None:
            return diff.sum(axis=1).astype(float)
        pair = (w[X - 1] + w[p - 1][None, :]) / 2
        return (pair * diff).sum(axis=1)
    if family == "footrule":
        return np.abs(X - p[None, :]).sum(axis=1).astype(float)
    if family == "kendall":
        posX = np.argsort(X, axis=1)
        posp = np.argsort(p)
        a_idx, b_idx = np.triu_indices(n, k=1)
        disc = (posX[:, a_idx] < posX[:, b_idx]) != (posp[a_idx] < posp[b_idx])[None, :]
        pw = np.ones(len(a_idx)) if w is None else (w[a_idx] + w[b_idx]) / 2
        return (disc * pw[None, :]).sum(axis=1)
    # Ulam: heaviest common subsequence, vectorised over rows of X
    prev = np.zeros((N, n + 1))
    for i in range(n):
        cur = np.zeros((N, n + 1))
        xi = X[:, i]
        gain = np.ones(N) if w is None else w[xi - 1]
        for j in range(1, n + 1):
            match = np.where(xi == p[j - 1], prev[:, j - 1] + gain, -np.inf)
            cur[:, j] = np.maximum(np.maximum(prev[:, j], cur[:, j - 1]), match)
        prev = cur
    total = float(n) if w is None else float(w.sum())
    return 2 * (total - prev[:, n])


def all_costs(P: Instance, metric: Metric, budget: OracleBudget = DEFAULT_BUDGET) -> np.ndarray:
    """cost(x, P) for every x in S_n, rows in lexicographic order."""
    if P.n > budget.max_n:
        raise BudgetExceeded(f"n={P.n} exceeds the enumeration budget {budget.max_n}")
    X = all_permutations(P.n)
    wt = P.weights_for(metric)
    w = None if wt is None else np.asarray(wt, dtype=float)
    total = np.zeros(len(X))
    for p in P.perms:
        total += _distances_to_all(X, p.forward, metric, w)
    return total / P.m


class MedianResult(NamedTuple):
    median: Permutation
    opt: float


def exact_median(P: Instance, metric: Metric, budget: OracleBudget = DEFAULT_BUDGET) -> MedianResult:
    """Lexicographically smallest exact 1-median and its cost."""
    costs = all_costs(P, metric, budget)
    best = costs.min()
    idx = int(np.flatnonzero(costs <= best + 1e-9)[0])
    return MedianResult(Permutation(tuple(int(v) for v in all_permutations(P.n)[idx])), float(costs[idx]))


# feedback sets -------------------------------------------------------------

Beats = Callable[[Hashable, Hashable], bool]


class FasResult(NamedTuple):
    weight: float
    order: tuple


def exact_feedback_arc_set(vertices: Sequence[Hashable], beats: Beats,
                           pair_weight: Optional[Callable[[Hashable, Hashable], float]] = None,
                           budget: OracleBudget = DEFAULT_BUDGET) -> FasResult:
    """Minimum weight of violated edges over all linear orders (Held-Karp style).

    An edge ``a -> b`` (``beats(a, b)``) is violated when ``b`` is placed
    before ``a``.  ``pair_weight`` defaults to 1 per edge.
    """
    verts = list(vertices)
    k = len(verts)
    if k > budget.max_vertices:
        raise BudgetExceeded(f"{k} vertices exceeds the subset budget {budget.max_vertices}")
    if k == 0:
        return FasResult(0.0, ())
    wt = pair_weight or (lambda a, b: 1.0)
    # penalty[v][u]: cost incurred when u is placed before v
    penalty = [[wt(verts[v], verts[u]) if beats(verts[v], verts[u]) else 0.0 for u in range(k)]
               for v in range(k)]
    full = 1 << k
    inf = float("inf")
    best = [inf] * full
    choice = [-1] * full
    best[0] = 0.0
    # entering[v][S]: penalty of appending v after the set S
    entering = []
    for v in range(k):
        row = [0.0] * full
        for S in range(1, full):
            low = (S & -S).bit_length() - 1
            row[S] = row[S & (S - 1)] + penalty[v][low]
        entering.append(row)
    for S in range(full):
        base = best[S]
        if base == inf:
            continue
        for v in range(k):
            bit = 1 << v
            if S & bit:
                continue
            cand = base + entering[v][S]
            T = S | bit
            if cand < best[T]:
                best[T] = cand
                choice[T] = v
    order = []
    S = full - 1
    while S:
        v = choice[S]
        order.append(verts[v])
        S &= ~(1 << v)
    return FasResult(best[full - 1], tuple(reversed(order)))


class FvsResult(NamedTuple):
    weight: float
    removed: frozenset


def exact_feedback_vertex_set(vertices: Sequence[Hashable], beats: Beats,
                              weight: Optional[Callable[[Hashable], float]] = None,
                              budget: OracleBudget = DEFAULT_BUDGET) -> FvsResult:
    """Minimum-weight vertex set whose removal leaves a tournament triangle-free.

    For tournaments, triangle-free and acyclic coincide.  Ties go to the
    smallest bitmask among optimal subsets.
    """
    verts = list(vertices)
    k = len(verts)
    if k > budget.max_vertices:
        raise BudgetExceeded(f"{k} vertices exceeds the subset budget {budget.max_vertices}")
    for a in range(k):
        for b in range(a + 1, k):
            if beats(verts[a], verts[b]) == beats(verts[b], verts[a]):
                raise InvalidInputError("feedback vertex oracle expects a tournament")
    wt = [1.0 if weight is None else float(weight(v)) for v in verts]
    out_mask = [sum(1 << u for u in range(k) if u != v and beats(verts[v], verts[u])) for v in range(k)]
    triangles = []
    for a, b, c in itertools.combinations(range(k), 3):
        ab = out_mask[a] >> b & 1
        bc = out_mask[b] >> c & 1
        ca = out_mask[c] >> a & 1
        if ab == bc == ca:
            triangles.append((1 << a) | (1 << b) | (1 << c))
    best_w = float("inf")
    best_mask = 0
    for mask in range(1 << k):
        w_mask = sum(wt[v] for v in range(k) if mask >> v & 1)
        if w_mask >= best_w:
            continue
        if all(t & mask for t in triangles):
            best_w = w_mask
            best_mask = mask
    return FvsResult(best_w, frozenset(verts[v] for v in range(k) if best_mask >> v & 1))


# block stitching -----------------------------------------------------------


def composition_objective(candidates: Sequence[Sequence], picks: Sequence[Optional[int]], n: int,
                          size: int) -> Optional[int]:
    """Objective of one pick per block (``None`` = dummies), or None when the windows overlap.

    Each member pays one per character outside its chosen windows, each
    chosen tuple pays its own objective, and each skipped block pays
    ``size`` insertions against each of the five members.
    """
    total = 0
    last_end = [1] * 5
    covered = [0] * 5
    for j, a in enumerate(picks):
        if a is None:
            total += 5 * size
            continue
        cand = candidates[j][a]
        for i, (s, e) in enumerate(cand.windows):
            if s < last_end[i]:
                return None
            covered[i] += e - s
            last_end[i] = e
        total += cand.objective
    return total + sum(n - c for c in covered)


def exhaustive_composition(candidates: Sequence[Sequence], n: int, size: int,
                           max_blocks: int = 3) -> int:
    """Minimum stitching objective by trying every pick sequence."""
    if len(candidates) > max_blocks:
        raise BudgetExceeded(f"{len(candidates)} blocks exceeds the enumeration budget {max_blocks}")
    options = [[None] + list(range(len(block))) for block in candidates]
    best = None
    for picks in itertools.product(*options):
        value = composition_objective(candidates, picks, n, size)
        if value is not None and (best is None or value < best):
            best = value
    return best
