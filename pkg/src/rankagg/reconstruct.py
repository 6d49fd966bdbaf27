"""Median reconstruction for five permutations under the Ulam (indel) distance.

Pipeline: split positions into blocks, build a grid of candidate windows
around each block, reconstruct one candidate block per five-window group,
stitch blocks together with a dynamic program over the grouped windows,
and finally turn the stitched string into a permutation.

Positions in windows are 1-based and half-open: ``(s, e)`` covers the
elements at positions ``s..e-1`` and ``s == e`` is an empty window.
"""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .perm import Instance, InvalidInputError, Permutation, longest_increasing
from .solvers import acyclic_order, triangle_removal

DUMMY = 0

# Constants from the worst-case analysis.  They are documented values only:
# with them the window grid is far too dense to enumerate.
ANALYSIS_RHO = 1e-6
ANALYSIS_ALPHA = 7e-6

Window = Tuple[int, int]
WindowTuple = Tuple[Window, Window, Window, Window, Window]

DEFAULT_TUPLE_CAP = 256


class AnalysisRegimeWarning(UserWarning):
    """Parameters outside the range covered by the worst-case analysis."""


class InvariantViolation(AssertionError):
    """An internal guarantee failed; indicates a bug rather than bad input."""


@dataclass(frozen=True)
class ReconstructParams:
    epsilon: float = 0.5
    rho: float = 0.25
    tuple_cap: int = DEFAULT_TUPLE_CAP

    def __post_init__(self) -> None:
        if not 0 < self.epsilon < 1:
            raise InvalidInputError("epsilon must lie in (0, 1)")
        if self.rho <= 0:
            raise InvalidInputError("rho must be positive")
        if self.tuple_cap < 1:
            raise InvalidInputError("tuple_cap must be >= 1")
        if self.rho > 1 / 9:
            warnings.warn(f"rho={self.rho} is above 1/9; the proven approximation constants do not apply",
                          AnalysisRegimeWarning, stacklevel=3)


@dataclass(frozen=True)
class BlockLayout:
    """Blocks of ``size`` consecutive positions; the last one may be shorter."""

    n: int
    count: int
    size: int

    def start(self, j: int) -> int:
        """1-based first position of block j (0-based block index)."""
        return 1 + j * self.size

    def end(self, j: int) -> int:
        """Exclusive end position of block j."""
        return min(self.start(j) + self.size, self.n + 1)

    def length(self, j: int) -> int:
        return self.end(j) - self.start(j)

    def block_of(self, pos: int) -> int:
        """Block index holding 1-based position ``pos``."""
        return (pos - 1) // self.size


def block_layout(n: int, epsilon: float) -> BlockLayout:
    """K = ceil(n^eps) nominal blocks of size ceil(n/K); trailing empty blocks dropped."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    k = max(1, math.ceil(n ** epsilon - 1e-12))
    size = math.ceil(n / k)
    return BlockLayout(n, math.ceil(n / size), size)


def _log_base(x: float, base: float) -> float:
    return math.log(x) / math.log(base)


def _floor_log(x: float, base: float) -> int:
    if x <= 0:
        return -1
    return math.floor(_log_base(x, base) + 1e-9)


def _ceil_log(x: float, base: float) -> int:
    if x <= 0:
        return -1
    return math.ceil(_log_base(x, base) - 1e-9)


def block_windows(layout: BlockLayout, j: int, rho: float, epsilon: float) -> Tuple[set, set]:
    """(windows, start positions) generated for block j by the scale/gap/end-point rules."""
    n = layout.n
    ell = layout.start(j)
    blen = layout.length(j)
    growth = 1 + rho
    n_eps = n ** epsilon
    windows: set = set()
    starts: set = set()
    for t in range(_ceil_log(2 * n, growth) + 1):
        scale = growth ** t
        gap = max(1, math.floor(rho * scale / n_eps))
        lo = max(1, math.ceil(ell - scale - 1e-9))
        hi = min(n + 1, math.floor(ell + scale + 1e-9))
        longer = [math.floor(growth ** a) for a in range(_floor_log(min(blen / rho, scale), growth) + 1)]
        shorter = [math.ceil(growth ** a) for a in range(_ceil_log(blen - rho * blen, growth) + 1)]
        ends_rel = {blen} | {blen + d for d in longer} | {blen - d for d in shorter}
        first = lo + (-lo) % gap
        for s in range(first, hi + 1, gap):
            starts.add(s)
            for rel in ends_rel:
                e = min(s + rel, n + 1)
                if e >= s:
                    windows.add((s, e))
    return windows, starts


@dataclass
class WindowGrid:
    layout: BlockLayout
    windows: List[List[Window]]     # W_j, sorted in grid order
    degenerate: List[List[Window]]  # SW_j, sorted in grid order
    all_degenerate: List[Window]    # SW, union over blocks, ascending

    def cost(self, j: int, w: Window) -> int:
        """Distance of a window from block j's own position range."""
        return max(abs(w[0] - self.layout.start(j)), abs(w[1] - self.layout.end(j)))

    def tuples(self, j: int, Q: Optional[Instance] = None) -> Iterator[WindowTuple]:
        """Lazily yield the grouped tuples of block j in grid order.

        Each coordinate ranks its windows by a score: the window cost without
        ``Q``, or with ``Q`` the size of the symmetric difference between the
        member's window contents and the block's consensus element set (see
        :func:`consensus_elements`), cost breaking ties.  The order only
        matters when the tuple cap truncates enumeration.  Tuples come out in
        nondecreasing total score; ties break by family (all regular windows
        first, then an empty window in coordinate 1..5) and then by
        per-coordinate rank.  Each tuple is produced once.
        """
        ranked = [self._ranked(j, i, Q) for i in range(5)]
        families = []
        for fam in range(6):
            lists = [ranked[k][1] if k + 1 == fam else ranked[k][0] for k in range(5)]
            families.append(lists)
        heap = []
        for fam, lists in enumerate(families):
            if all(lists):
                heap.append((sum(c[0][0] for c in lists), fam, (0, 0, 0, 0, 0)))
        heapq.heapify(heap)
        seen = set()
        while heap:
            total, fam, idx = heapq.heappop(heap)
            lists = families[fam]
            tup = tuple(lists[k][idx[k]][1] for k in range(5))
            if tup not in seen:
                seen.add(tup)
                yield tup
            last = max((k for k in range(5) if idx[k]), default=0)
            for k in range(last, 5):
                if idx[k] + 1 < len(lists[k]):
                    nxt = idx[:k] + (idx[k] + 1,) + idx[k + 1:]
                    heapq.heappush(heap, (total - lists[k][idx[k]][0] + lists[k][idx[k] + 1][0], fam, nxt))

    def _ranked(self, j: int, i: int, Q: Optional[Instance]):
        """(regular, empty) windows for coordinate i as sorted (score, window) lists."""
        if Q is None:
            def score(w):
                return self.cost(j, w)
        else:
            target = consensus_elements(Q, self.layout, j)
            seq = Q[i].forward

            def score(w):
                return len(set(seq[w[0] - 1:w[1] - 1]) ^ target)
        reg = sorted((score(w), self.cost(j, w), w) for w in self.windows[j])
        emp = sorted((score(w), self.cost(j, w), w) for w in self.all_degenerate)
        return [(a, w) for a, _, w in reg], [(a, w) for a, _, w in emp]


def consensus_elements(Q: Instance, layout: BlockLayout, j: int) -> frozenset:
    """Block j's slice of the elements ordered by median position over Q.

    Ties break by total position, then by element.
    """
    def key(e: int):
        pos = sorted(p.inverse[e - 1] for p in Q.perms)
        return pos[len(pos) // 2], sum(pos), e

    order = sorted(range(1, Q.n + 1), key=key)
    return frozenset(order[layout.start(j) - 1:layout.end(j) - 1])


def window_grid(n: int, params: ReconstructParams) -> WindowGrid:
    layout = block_layout(n, params.epsilon)
    W, SW, all_sw = [], [], set()
    for j in range(layout.count):
        wins, starts = block_windows(layout, j, params.rho, params.epsilon)
        grid = WindowGrid(layout, [], [], [])
        W.append(sorted(wins, key=lambda w: (grid.cost(j, w), w)))
        deg = sorted(((s, s) for s in starts), key=lambda w: (grid.cost(j, w), w))
        SW.append(deg)
        all_sw.update(deg)
    return WindowGrid(layout, W, SW, sorted(all_sw))


# block reconstruction ---------------------------------------------------------


def block_reconstruction(strings: Sequence[Sequence[int]], size: int) -> Tuple[int, ...]:
    """Consensus of five substrings: majority vertices, pruning, topological order, padding."""
    if len(strings) != 5:
        raise InvalidInputError("block reconstruction takes five strings")
    counts: Dict[int, int] = {}
    for s in strings:
        for e in s:
            counts[e] = counts.get(e, 0) + 1
    verts = sorted(e for e, c in counts.items() if c >= 4)
    k = len(verts)
    positions = [{e: i for i, e in enumerate(s)} for s in strings]
    out_masks = [0] * k
    adjacent = [0] * k
    for a in range(k):
        ea = verts[a]
        for b in range(a + 1, k):
            eb = verts[b]
            ab = ba = 0
            for pos in positions:
                pa = pos.get(ea)
                if pa is None:
                    continue
                pb = pos.get(eb)
                if pb is None:
                    continue
                if pa < pb:
                    ab += 1
                else:
                    ba += 1
            if ab > ba:
                out_masks[a] |= 1 << b
            elif ba > ab:
                out_masks[b] |= 1 << a
            else:
                continue
            adjacent[a] |= 1 << b
            adjacent[b] |= 1 << a
    alive = (1 << k) - 1
    # drop both ends of every non-adjacent pair, lowest pair first
    for a in range(k):
        if not alive >> a & 1:
            continue
        missing = alive & ~adjacent[a] & ~((1 << (a + 1)) - 1)
        if missing:
            b = (missing & -missing).bit_length() - 1
            alive &= ~((1 << a) | (1 << b))
    alive &= ~triangle_removal(out_masks, alive)
    text = [verts[v] for v in acyclic_order(out_masks, alive)]
    if len(text) < size:
        text.extend([DUMMY] * (size - len(text)))
    return tuple(text)


def indel(text: Sequence[int], window: Sequence[int]) -> int:
    """Insert/delete distance between a block text and a substring; dummies never match."""
    where = {e: i for i, e in enumerate(window)}
    seq = [where[e] for e in text if e != DUMMY and e in where]
    return len(text) + len(window) - 2 * longest_increasing(seq)


@dataclass(frozen=True)
class CandidateBlock:
    block: int
    windows: WindowTuple
    text: Tuple[int, ...]
    objective: int

    @property
    def length(self) -> int:
        return len(self.text)


@dataclass(frozen=True)
class BlockSummary:
    """What the stitching step needs from a candidate: no block text."""

    block: int
    windows: WindowTuple
    length: int
    objective: int


def candidate_block(Q: Instance, j: int, windows: WindowTuple, size: int) -> CandidateBlock:
    subs = [Q[i].forward[s - 1:e - 1] for i, (s, e) in enumerate(windows)]
    text = block_reconstruction(subs, size)
    return CandidateBlock(j, windows, text, sum(indel(text, sub) for sub in subs))


def tuple_schedule(Q: Instance, grid: WindowGrid, j: int, cap: int) -> Tuple[List[WindowTuple], bool]:
    """The first ``cap`` tuples of block j in grid order, and whether more remain."""
    out: List[WindowTuple] = []
    for tup in grid.tuples(j, Q):
        if len(out) == cap:
            return out, True
        out.append(tup)
    return out, False


def enumerate_candidates(Q: Instance, grid: WindowGrid, j: int, cap: int) -> Tuple[List[CandidateBlock], int, bool]:
    """(candidates, tuple count, truncated) for block j, stopping at ``cap`` tuples."""
    tuples, truncated = tuple_schedule(Q, grid, j, cap)
    out = [candidate_block(Q, j, tup, grid.layout.size) for tup in tuples]
    return out, len(out), truncated


# stitching --------------------------------------------------------------------


@dataclass
class Composition:
    value: int
    chosen: List[Tuple[int, int]]  # (block, index within that block's candidate list)


def compose_blocks(candidates: Sequence[Sequence], n: int, size: int) -> Composition:
    """Minimise the block edit objective over valid candidate sequences.

    ``candidates[j]`` lists candidates (anything with ``windows`` and
    ``objective``) for block j; the number of blocks is ``len(candidates)``.
    A sequence is valid when each chosen tuple's windows start at or after the
    previous chosen tuple's windows end, coordinatewise.  Unchosen blocks
    count as ``size`` dummies.  Ties keep the first-found option.
    """
    K = len(candidates)
    flat: List[Tuple[int, int]] = []
    dp_vals: List[int] = []
    back: List[int] = []
    prev_ends = np.zeros((0, 5), dtype=np.int64)
    prev_keys = np.zeros(0, dtype=np.int64)
    for j, block in enumerate(candidates):
        if not block:
            continue
        starts = np.array([[w[0] for w in c.windows] for c in block], dtype=np.int64)
        ends = np.array([[w[1] for w in c.windows] for c in block], dtype=np.int64)
        obj = np.array([c.objective for c in block], dtype=np.int64)
        # D[a] = base_a + min(-5, min over valid earlier b of key_b)
        base = starts.sum(axis=1) + 5 * j * size + obj
        vals = base - 5
        ptr = np.full(len(block), -1, dtype=np.int64)
        if len(prev_keys):
            uniq, inverse = np.unique(starts, axis=0, return_inverse=True)
            inverse = np.asarray(inverse).reshape(-1)
            for u, s in enumerate(uniq):
                ok = np.all(prev_ends <= s[None, :], axis=1)
                if not ok.any():
                    continue
                keys = np.where(ok, prev_keys, np.iinfo(np.int64).max)
                best = int(keys.argmin())
                if keys[best] < -5:
                    rows = inverse == u
                    vals[rows] = base[rows] + keys[best]
                    ptr[rows] = best
        for a in range(len(block)):
            flat.append((j, a))
        dp_vals.extend(int(v) for v in vals)
        back.extend(int(p) for p in ptr)
        prev_ends = np.vstack([prev_ends, ends])
        prev_keys = np.concatenate([prev_keys, vals - ends.sum(axis=1) - 5 * (j + 1) * size])
    if not flat:
        return Composition(5 * (K * size + n), [])
    best_val, best_idx = None, -1
    for idx, (j, a) in enumerate(flat):
        ends_sum = sum(w[1] for w in candidates[j][a].windows)
        total = dp_vals[idx] + 5 * (n + 1) - ends_sum + 5 * (K - 1 - j) * size
        if best_val is None or total < best_val:
            best_val, best_idx = total, idx
    chosen = []
    idx = best_idx
    while idx != -1:
        chosen.append(flat[idx])
        idx = back[idx]
    chosen.reverse()
    return Composition(int(best_val), chosen)


def assemble(texts: Dict[int, Sequence[int]], count: int, size: int) -> List[Tuple[int, ...]]:
    """Block list with chosen texts in place and ``size`` dummies elsewhere."""
    return [tuple(texts[j]) if j in texts else (DUMMY,) * size for j in range(count)]


def postprocess(intermediate: Sequence[int], n: int) -> Permutation:
    """Trim leftmost dummies down to length n, then fill dummies with unused elements ascending."""
    seq = list(intermediate)
    if len(seq) < n:
        raise InvariantViolation(f"intermediate string has length {len(seq)} < {n}")
    present = [e for e in seq if e != DUMMY]
    if len(set(present)) != len(present):
        raise InvariantViolation("intermediate string repeats an element")
    if any(not 1 <= e <= n for e in present):
        raise InvariantViolation("intermediate string holds an out-of-range element")
    excess = len(seq) - n
    out = []
    for e in seq:
        if e == DUMMY and excess > 0:
            excess -= 1
            continue
        out.append(e)
    if excess:
        raise InvariantViolation("too few dummies to trim")
    used = set(present)
    fill = iter(e for e in range(1, n + 1) if e not in used)
    return Permutation(tuple(next(fill) if e == DUMMY else e for e in out))


# full pipeline ---------------------------------------------------------------------


@dataclass
class ReconstructTrace:
    tuple_counts: List[int]
    truncated: List[bool]
    block_ed: int
    chosen: List[Tuple[int, WindowTuple]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "tupleCounts": list(self.tuple_counts),
            "truncated": list(self.truncated),
            "blockED": self.block_ed,
            "chosen": [{"block": j, "windows": [list(w) for w in wins]} for j, wins in self.chosen],
        }


@dataclass
class ReconstructResult:
    permutation: Permutation
    intermediate: List[Tuple[int, ...]]
    trace: ReconstructTrace


def scalable_median_reconstruct(Q: Instance, params: Optional[ReconstructParams] = None) -> ReconstructResult:
    params = params or ReconstructParams()
    if Q.m != 5:
        raise InvalidInputError(f"reconstruction expects five permutations, got {Q.m}")
    grid = window_grid(Q.n, params)
    layout = grid.layout
    per_block, counts, truncated = [], [], []
    for j in range(layout.count):
        cands, count, trunc = enumerate_candidates(Q, grid, j, params.tuple_cap)
        per_block.append(cands)
        counts.append(count)
        truncated.append(trunc)
    comp = compose_blocks(per_block, Q.n, layout.size)
    texts = {j: per_block[j][a].text for j, a in comp.chosen}
    blocks = assemble(texts, layout.count, layout.size)
    flat = [e for blk in blocks for e in blk]
    perm = postprocess(flat, Q.n)
    chosen = [(j, per_block[j][a].windows) for j, a in comp.chosen]
    return ReconstructResult(perm, blocks, ReconstructTrace(counts, truncated, comp.value, chosen))
