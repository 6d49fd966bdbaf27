"""Distributed versions of the three-member consensus solvers.

Each returns exactly what the matching routine in :mod:`rankagg.solvers`
returns on the same input and seed.
"""

from __future__ import annotations

import math
from typing import Dict, List, Optional, Sequence, Tuple

from ..perm import Instance, InvalidInputError, Permutation
from ..solvers import kwik_sort, pivot_priorities
from .engine import Cluster, MachineId, MpcConfig, MpcTrace, run_program
from .primitives import broadcast, distribute_permutation, perm_machine, prefix_sum

NO_CHILD = 0


def _check(Q: Instance, cfg: MpcConfig, r: int = 3) -> None:
    if Q.m != r:
        raise InvalidInputError(f"expected exactly {r} permutations, got {Q.m}")
    if Q.n != cfg.n:
        raise InvalidInputError(f"instance has n={Q.n} but the cluster is sized for n={cfg.n}")


def distribute_members(cl: Cluster, Q: Instance) -> List[str]:
    names = [f"m{t}" for t in range(Q.m)]
    for name, p in zip(names, Q.perms):
        distribute_permutation(cl, p, name)
    return names


def _gather_columns(cl: Cluster, names: Sequence[str], key: str, dest_kind: str) -> None:
    """Member machines send their ``key`` block to ``(dest_kind, block)``."""
    K = cl.cfg.layout.count

    def ship(mid, store):
        return [((dest_kind, mid[2]), "cols", (names.index(mid[1]), store[key]))]

    cl.step(ship, [perm_machine(name, i) for name in names for i in range(K)])


def _columns(store) -> List[Tuple[int, ...]]:
    return [col for _, col in sorted(store.pop("cols"))]


def _output(cl: Cluster, n: int) -> Permutation:
    """Output blocks live on ``("out", i)`` as ``cells`` (position, element) lists."""
    layout = cl.cfg.layout

    def settle(mid, store):
        store["block"] = tuple(e for _, e in sorted(store.pop("cells")))

    outs = [("out", i) for i in range(layout.count)]
    cl.step(settle, outs)
    seq: List[int] = []
    for mid in outs:
        seq.extend(cl.read(mid)["block"])
    if len(seq) != n:
        raise AssertionError("distributed output has the wrong length")
    return Permutation(tuple(seq))


def _block(e_or_pos: int, size: int) -> int:
    return (e_or_pos - 1) // size


def _rank_pairing(cl: Cluster, pos_ids: Sequence[MachineId], elem_ids: Sequence[MachineId]) -> None:
    """Pair the r-th free position with the r-th smallest unused element.

    Position machines hold ``free`` (ascending 1-based positions), element
    machines hold ``unused`` (ascending).  Pairs land on the position
    machines as ``fill`` (position, element) lists.
    """
    b = cl.cfg.layout.size

    def count(mid, store):
        if mid[0] == "pos":
            return (len(store["free"]), 0)
        return (0, len(store["unused"]))

    prefix_sum(cl, list(pos_ids) + list(elem_ids), count, "offset", "pairing", 2)

    def announce(mid, store):
        offsets, _ = store.pop("offset")[0]
        if mid[0] == "pos":
            items, base, key = store.pop("free"), offsets[0], "slot"
        else:
            items, base, key = store.pop("unused"), offsets[1], "item"
        return [(("rank", (base + t) // b), key, (base + t, v)) for t, v in enumerate(items)]

    cl.step(announce, list(pos_ids) + list(elem_ids))

    def pair(mid, store):
        slots = dict(store.pop("slot", []))
        items = dict(store.pop("item", []))
        return [(("pos", _block(slots[r], b)), "fill", (slots[r], items[r])) for r in sorted(slots)]

    cl.step(pair, cl.machines("rank"))


def mpc_hamming_median(Q: Instance, cfg: MpcConfig, w: Optional[Sequence[float]] = None,
                       seed: int = 0) -> Tuple[Optional[Permutation], MpcTrace]:
    """Positionwise majority, then unused elements ascending into open positions."""
    _check(Q, cfg)
    layout = cfg.layout
    K, b, n = layout.count, layout.size, Q.n

    def program(cl: Cluster):
        names = distribute_members(cl, Q)
        _gather_columns(cl, names, "fwd", "pos")

        def vote(mid, store):
            cols = _columns(store)
            base = layout.start(mid[1])
            out, free, msgs = [], [], []
            for k, (a, x, c) in enumerate(zip(*cols)):
                if a == x or a == c:
                    v = a
                elif x == c:
                    v = x
                else:
                    v = 0
                    free.append(base + k)
                out.append(v)
                if v:
                    msgs.append((("elem", _block(v, b)), "used", v))
            store["out"] = out
            store["free"] = free
            return msgs

        pos_ids = [("pos", i) for i in range(K)]
        elem_ids = [("elem", i) for i in range(K)]
        cl.step(vote, pos_ids)

        def unused(mid, store):
            used = set(store.pop("used", []))
            store["unused"] = [e for e in range(layout.start(mid[1]), layout.end(mid[1])) if e not in used]

        cl.step(unused, elem_ids)
        _rank_pairing(cl, pos_ids, elem_ids)

        def emit(mid, store):
            out = store.pop("out")
            base = layout.start(mid[1])
            for k, e in store.pop("fill", []):
                out[k - base] = e
            return [(("out", mid[1]), "cells", (base + k, e)) for k, e in enumerate(out)]

        cl.step(emit, pos_ids)
        return _output(cl, n)

    return run_program(program, cfg)


def mpc_footrule_median(Q: Instance, cfg: MpcConfig,
                        seed: int = 0) -> Tuple[Optional[Permutation], MpcTrace]:
    """Positionwise median values, then ranks by (value, position) via a counting sort."""
    _check(Q, cfg)
    layout = cfg.layout
    K, b, n = layout.count, layout.size, Q.n

    def program(cl: Cluster):
        names = distribute_members(cl, Q)
        _gather_columns(cl, names, "fwd", "pos")

        def medians(mid, store):
            cols = _columns(store)
            base = layout.start(mid[1])
            return [(("val", _block(sorted(t)[1], b)), "z", (sorted(t)[1], base + k))
                    for k, t in enumerate(zip(*cols))]

        cl.step(medians, [("pos", i) for i in range(K)])

        def count(mid, store):
            store["z"] = sorted(store.get("z", []))
            return (len(store["z"]),)

        vals = [("val", i) for i in range(K)]
        prefix_sum(cl, vals, count, "offset", "footrule", 1)

        def rank(mid, store):
            (base,), _ = store.pop("offset")[0]
            return [(("out", _block(k, b)), "cells", (k, base + t + 1))
                    for t, (_, k) in enumerate(store.pop("z"))]

        cl.step(rank, vals)
        return _output(cl, n)

    return run_program(program, cfg)


# multi-pivot KWIK-SORT --------------------------------------------------------------


def pivot_count(n: int, block_size: int) -> int:
    """Pivots drawn per layer."""
    return min(math.ceil(8 * math.log2(max(n, 2))), block_size)


PIVOT_LAYERS = 2


def _beats(pa: Sequence[int], pb: Sequence[int]) -> bool:
    return 2 * sum(1 for x, y in zip(pa, pb) if x < y) > len(pa)


def mpc_kendall_median(Q: Instance, cfg: MpcConfig, w: Optional[Sequence[float]] = None,
                       seed: int = 0) -> Tuple[Optional[Permutation], MpcTrace]:
    """KWIK-SORT with a fixed number of pivot layers, then local sorting of the buckets.

    Priorities come from the same keyed permutation as the offline solver,
    so a layer holds the vertices of the next ``pivot_count`` priority ranks
    and the output coincides with the offline order.  Pivot trees travel as
    priority-ordered pivot lists and every receiver rebuilds them by insertion.
    """
    _check(Q, cfg)
    layout = cfg.layout
    K, b, n = layout.count, layout.size, Q.n
    k = pivot_count(n, b)
    COORD, ORDER = ("coord",), ("order",)
    verts = [("vert", i) for i in range(K)]

    def program(cl: Cluster):
        names = distribute_members(cl, Q)
        _gather_columns(cl, names, "inv", "vert")
        prio = pivot_priorities(seed, n)

        def positions(mid, store):
            cols = _columns(store)
            lo = layout.start(mid[1])
            store["pos"] = tuple(zip(*cols))
            msgs = []
            for t, ps in enumerate(store["pos"]):
                if prio(lo + t - 1) < k:
                    msgs.append((COORD, "piv1", (prio(lo + t - 1), lo + t) + ps))
            return msgs

        cl.step(positions, verts)

        def gather(key, out):
            def fn(mid, store):
                flat = tuple(x for entry in sorted(store.pop(key, [])) for x in entry[1:])
                store[out] = flat
                return [(ORDER, key, flat)]
            return fn

        cl.step(gather("piv1", "tree1"), [COORD])
        broadcast(cl, {COORD: verts}, "tree1", "tree1", "layer1", consume=True)

        def descend1(mid, store):
            tree = PivotTree()
            tree.extend(store.pop("tree1")[0], 4)
            lo = layout.start(mid[1])
            slots, msgs = [], []
            for t, ps in enumerate(store["pos"]):
                e = lo + t
                r = prio(e - 1)
                slot = None if r < k else tree.descend(tree.root, ps)
                slots.append(slot)
                if k <= r < PIVOT_LAYERS * k:
                    msgs.append((COORD, "piv2", (r, e) + ps + slot))
            store["slot"] = slots
            return msgs

        cl.step(descend1, verts)
        cl.step(gather("piv2", "tree2"), [COORD])
        broadcast(cl, {COORD: verts}, "tree2", "tree2", "layer2", consume=True)

        def descend2(mid, store):
            tree = PivotTree()
            tree.extend(store.pop("tree2")[0], 6)
            lo = layout.start(mid[1])
            slots = store.pop("slot")
            msgs = []
            for t, ps in enumerate(store.pop("pos")):
                e = lo + t
                if prio(e - 1) < PIVOT_LAYERS * k:
                    continue
                slot = slots[t]
                if slot in tree.attach:
                    slot = tree.descend(tree.attach[slot], ps)
                msgs.append((("bucket",) + slot, "members", (e,) + ps))
            return msgs

        cl.step(descend2, verts)

        def solve(mid, store):
            members = {m[0]: m[1:] for m in store.pop("members")}
            keys = {e: prio(e - 1) for e in members}
            order = kwik_sort(sorted(members), lambda a, c: _beats(members[a], members[c]), keys.__getitem__)
            store["order"] = tuple(order)
            return [(ORDER, "size", (mid[1], mid[2], len(order)))]

        buckets = cl.machines("bucket")
        cl.step(solve, buckets)

        def place(mid, store):
            tree = PivotTree()
            tree.extend(store.pop("piv1")[0], 4)
            tree.extend(store.pop("piv2", [()])[0], 6)
            sizes = {(p, s): c for p, s, c in store.pop("size", [])}
            msgs = []
            cursor = 1
            stack: List[Tuple[str, object]] = [("node", tree.root)]
            while stack:
                kind, item = stack.pop()
                if kind == "pivot":
                    msgs.append((("out", _block(cursor, b)), "cells", (cursor, item)))
                    cursor += 1
                elif kind == "bucket":
                    if item in sizes:
                        msgs.append((("bucket",) + item, "start", cursor))
                        cursor += sizes[item]
                else:
                    left, right = tree.children(item)
                    stack.append(("node", right) if right is not None else ("bucket", (item, 1)))
                    stack.append(("pivot", item))
                    stack.append(("node", left) if left is not None else ("bucket", (item, 0)))
            return msgs

        cl.step(place, [ORDER])

        def emit(mid, store):
            start = store.pop("start")[0]
            return [(("out", _block(start + t, b)), "cells", (start + t, e))
                    for t, e in enumerate(store.pop("order"))]

        cl.step(emit, buckets)
        return _output(cl, n)

    return run_program(program, cfg)


class PivotTree:
    """Binary tree of pivots grown by insertion in priority order.

    A vertex goes left of a pivot when it beats the pivot.  Pivots of the
    second layer hang below the slot ``(pivot, side)`` their first-layer
    descent ended in; ``attach`` maps such slots to the subtree roots.
    """

    def __init__(self) -> None:
        self.root: Optional[int] = None
        self.pos: Dict[int, Tuple[int, ...]] = {}
        self.kids: Dict[int, List[Optional[int]]] = {}
        self.attach: Dict[Tuple[int, int], int] = {}

    def extend(self, flat: Sequence[int], stride: int) -> None:
        """Insert records (e, p0, p1, p2[, slot pivot, slot side]) in the given order."""
        for i in range(0, len(flat), stride):
            e, ps = flat[i], tuple(flat[i + 1:i + 4])
            self.pos[e] = ps
            self.kids[e] = [None, None]
            if stride == 6:
                slot = (flat[i + 4], flat[i + 5])
                top = self.attach.get(slot)
                if top is None:
                    self.attach[slot] = e
                    self.kids[slot[0]] = self.kids.get(slot[0], [None, None])
                    self.kids[slot[0]][slot[1]] = e
                    continue
            elif self.root is None:
                self.root = e
                continue
            else:
                top = self.root
            cur, side = self.descend(top, ps)
            self.kids[cur][side] = e

    def descend(self, top: int, ps: Sequence[int]) -> Tuple[int, int]:
        """Walk down from ``top``; returns (last pivot, 0 for left / 1 for right)."""
        cur = top
        while True:
            side = 0 if _beats(ps, self.pos[cur]) else 1
            nxt = self.kids[cur][side]
            if nxt is None:
                return cur, side
            cur = nxt

    def children(self, e: int) -> Tuple[Optional[int], Optional[int]]:
        left, right = self.kids.get(e, [None, None])
        return left, right
