"""Consensus routines for a handful of permutations.

Each solver takes a small instance ``Q`` (3 members, or 5 for Ulam) and
returns one permutation close to every member.  The framework in
:mod:`rankagg.slack` feeds them random subsets of the full input.
"""

from __future__ import annotations

from typing import Callable, Dict, Hashable, Iterable, List, Optional, Sequence

from .perm import Instance, InvalidInputError, Metric, Permutation
from .rng import SeededPermutation
from .slack import LocalSolver


def _require(Q: Instance, r: int, name: str) -> None:
    if Q.m != r:
        raise InvalidInputError(f"{name} expects exactly {r} permutations, got {Q.m}")


def hamming_majority_median(Q: Instance, w: Optional[Sequence[float]] = None) -> Permutation:
    """Positionwise majority; unresolved positions get the leftover elements in ascending order.

    The weights do not change the output; they are accepted for a uniform
    signature across solvers.
    """
    _require(Q, 3, "hamming_majority_median")
    n = Q.n
    out = [0] * n
    used = set()
    for k in range(n):
        a, b, c = (p.forward[k] for p in Q.perms)
        if a == b or a == c:
            out[k] = a
        elif b == c:
            out[k] = b
        else:
            continue
        used.add(out[k])
    leftovers = iter(e for e in range(1, n + 1) if e not in used)
    for k in range(n):
        if out[k] == 0:
            out[k] = next(leftovers)
    return Permutation(tuple(out))


def positionwise_median(Q: Instance) -> List[int]:
    """z[k] = median of the three values at position k (a pseudo-permutation)."""
    _require(Q, 3, "positionwise_median")
    return [sorted(p.forward[k] for p in Q.perms)[1] for k in range(Q.n)]


def nearest_permutation(z: Sequence[int]) -> Permutation:
    """Rank positions by (z value, position); minimises footrule distance to z."""
    order = sorted(range(len(z)), key=lambda k: (z[k], k))
    out = [0] * len(z)
    for rank, k in enumerate(order, start=1):
        out[k] = rank
    return Permutation(tuple(out))


def footrule_median(Q: Instance) -> Permutation:
    return nearest_permutation(positionwise_median(Q))


class MajorityTournament:
    """Pairwise majority orientation over the members of ``Q``.

    ``beats(a, b)`` holds when strictly more members place ``a`` before ``b``
    than the reverse.  With an odd number of complete members there are no ties.
    """

    def __init__(self, Q: Instance, w: Optional[Sequence[float]] = None) -> None:
        self.n = Q.n
        self.r = Q.m
        self._pos = [p.inverse for p in Q.perms]
        self.weights = None if w is None else tuple(w)

    def before_count(self, a: int, b: int) -> int:
        return sum(1 for inv in self._pos if inv[a - 1] < inv[b - 1])

    def beats(self, a: int, b: int) -> bool:
        return 2 * self.before_count(a, b) > self.r

    def edge_weight(self, a: int, b: int) -> float:
        if self.weights is None:
            return 1.0
        return (self.weights[a - 1] + self.weights[b - 1]) / 2

    def vertex_weight(self, e: int) -> float:
        return 1.0 if self.weights is None else self.weights[e - 1]

    def out_masks(self) -> List[int]:
        """Bitmask of beaten vertices, indexed by element (bit e-1 for element e)."""
        masks = []
        for a in range(1, self.n + 1):
            m = 0
            for b in range(1, self.n + 1):
                if a != b and self.beats(a, b):
                    m |= 1 << (b - 1)
            masks.append(m)
        return masks

    def back_edge_weight(self, order: Sequence[int]) -> float:
        """Total weight of majority edges that ``order`` reverses."""
        pos = {e: i for i, e in enumerate(order)}
        total = 0.0
        for a in range(1, self.n + 1):
            for b in range(a + 1, self.n + 1):
                if self.beats(a, b) != (pos[a] < pos[b]):
                    total += self.edge_weight(a, b)
        return total


def kwik_sort(vertices: Iterable[Hashable], beats: Callable[[Hashable, Hashable], bool],
              priority: Callable[[Hashable], int]) -> List:
    """KWIK-SORT where each subproblem pivots on its lowest-priority vertex.

    With a uniformly random priority order this is the usual uniform-pivot
    KWIK-SORT.  Vertices that beat the pivot go left, the rest go right.
    """
    out: List = []
    stack: List = [(False, list(vertices))]
    while stack:
        is_vertex, item = stack.pop()
        if is_vertex:
            out.append(item)
            continue
        if not item:
            continue
        pivot = min(item, key=priority)
        left = [v for v in item if v != pivot and beats(v, pivot)]
        right = [v for v in item if v != pivot and not beats(v, pivot)]
        stack.append((False, right))
        stack.append((True, pivot))
        stack.append((False, left))
    return out


def pivot_priorities(seed: int, n: int) -> SeededPermutation:
    """Priority of element e is ``prio(e - 1)``; shared with the distributed version."""
    return SeededPermutation(seed, n)


def kendall_kwik_sort_median(Q: Instance, w: Optional[Sequence[float]] = None, seed: int = 0) -> Permutation:
    _require(Q, 3, "kendall_kwik_sort_median")
    t = MajorityTournament(Q, w)
    prio = pivot_priorities(seed, Q.n)
    keys = {e: prio(e - 1) for e in range(1, Q.n + 1)}
    order = kwik_sort(range(1, Q.n + 1), t.beats, keys.__getitem__)
    return Permutation(tuple(order))


# feedback vertex sets on tournaments ----------------------------------------


def _lowest_bit(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


def triangle_removal(out_masks: Sequence[int], alive: int,
                     weights: Optional[Sequence[float]] = None) -> int:
    """Destroy every directed triangle, scanning triples in lexicographic order.

    Vertices are bit indices.  Without weights each triangle found loses all
    three vertices.  With weights the residual of each vertex of the triangle
    drops by the smallest residual among the three and exhausted vertices are
    removed (local ratio); unit weights reduce to the unweighted rule.
    Returns the removed-vertex mask.
    """
    k = len(out_masks)
    residual = [1.0] * k if weights is None else [float(x) for x in weights]
    in_masks = [0] * k
    for v, m in enumerate(out_masks):
        mm = m
        while mm:
            u = _lowest_bit(mm)
            in_masks[u] |= 1 << v
            mm &= mm - 1
    removed = 0
    for a in range(k):
        for b in range(a + 1, k):
            while (alive >> a & 1) and (alive >> b & 1):
                above_b = alive & ~((1 << (b + 1)) - 1)
                if out_masks[a] >> b & 1:
                    cs = out_masks[b] & in_masks[a] & above_b
                else:
                    cs = in_masks[b] & out_masks[a] & above_b
                if not cs:
                    break
                c = _lowest_bit(cs)
                tri = (a, b, c)
                step = min(residual[v] for v in tri)
                for v in tri:
                    residual[v] -= step
                    if residual[v] <= 1e-12:
                        alive &= ~(1 << v)
                        removed |= 1 << v
    return removed


def acyclic_order(out_masks: Sequence[int], alive: int) -> List[int]:
    """Topological order of a transitive sub-tournament: sort by out-degree within it."""
    verts = [v for v in range(len(out_masks)) if alive >> v & 1]
    deg = {v: bin(out_masks[v] & alive).count("1") for v in verts}
    order = sorted(verts, key=lambda v: -deg[v])
    if sorted(deg.values()) != list(range(len(verts))):
        raise AssertionError("remaining tournament is not acyclic")
    return order


def ulam_fvs_solution(Q: Instance, w: Optional[Sequence[float]] = None):
    """(median, removed elements) for the five-member Ulam solver."""
    _require(Q, 5, "ulam_fvs_median")
    n = Q.n
    t = MajorityTournament(Q, w)
    out = t.out_masks()
    alive = (1 << n) - 1
    removed = triangle_removal(out, alive, w)
    order = [v + 1 for v in acyclic_order(out, alive & ~removed)]
    tail = [v + 1 for v in range(n) if removed >> v & 1]
    return Permutation(tuple(order + tail)), tuple(tail)


def ulam_fvs_median(Q: Instance, w: Optional[Sequence[float]] = None) -> Permutation:
    return ulam_fvs_solution(Q, w)[0]


# solver registry --------------------------------------------------------------


def local_solver(metric: Metric, ulam_method: str = "fvs", reconstruct_params=None) -> LocalSolver:
    """The default solver for a metric family."""
    family = metric.family
    if family == "hamming":
        return LocalSolver("hamming-majority", 3, lambda Q, seed: hamming_majority_median(Q))
    if family == "footrule":
        if metric.weighted:
            raise InvalidInputError("footrule has no weighted variant")
        return LocalSolver("footrule-median", 3, lambda Q, seed: footrule_median(Q))
    if family == "kendall":
        return LocalSolver("kendall-kwiksort", 3,
                           lambda Q, seed: kendall_kwik_sort_median(Q, Q.weights, seed))
    if ulam_method == "fvs":
        return LocalSolver("ulam-fvs", 5, lambda Q, seed: ulam_fvs_median(Q, Q.weights if metric.weighted else None))
    if ulam_method == "reconstruct":
        from .reconstruct import ReconstructParams, scalable_median_reconstruct

        params = reconstruct_params or ReconstructParams()
        return LocalSolver("ulam-reconstruct", 5,
                           lambda Q, seed: scalable_median_reconstruct(Q, params).permutation)
    raise InvalidInputError(f"unknown Ulam solver {ulam_method!r}")
