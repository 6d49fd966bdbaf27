"""Communication patterns shared by the distributed algorithms.

Aggregation trees have fan-in ``max(2, floor(cap / message words))``
(prefix sums also budget for the downward pass), so their depth adapts to
the word cap.  Broadcast trees have a fixed depth.
"""

from __future__ import annotations

import math
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from ..perm import Permutation
from .engine import Cluster, MachineId, Store, words


def fan(cap: int, message_words: int) -> int:
    return max(2, cap // max(1, message_words))


def tree_depth(count: int, f: int) -> int:
    depth = 1
    while f ** depth < count:
        depth += 1
    return depth


def _add(a: Sequence, b: Sequence) -> tuple:
    return tuple(x + y for x, y in zip(a, b))


def prefix_sum(cl: Cluster, leaves: Sequence[MachineId], leaf_value: Callable[[MachineId, Store], Sequence],
               out_key: str, tag: str, width: int) -> None:
    """Exclusive prefix sums of per-leaf vectors, in the order of ``leaves``.

    ``leaf_value`` runs on each leaf in the first step.  Afterwards every leaf
    holds ``store[out_key] = [(offsets, totals)]``.  Takes ``2 * depth`` steps.
    """
    leaves = list(leaves)
    # a node holds its children's (index, vector) pairs plus one (offset, total) pair
    # from its parent, then sends one (offset, total) pair per child
    f = max(2, min((cl.cap - 2 * width) // (width + 1), cl.cap // (2 * width)))
    depth = tree_depth(len(leaves), f)
    index = {mid: i for i, mid in enumerate(leaves)}
    up, down = f"_up_{tag}", f"_down_{tag}"

    def node(level: int, i: int) -> MachineId:
        return ("tree", tag, level, i)

    def level_nodes(level: int) -> List[MachineId]:
        return [node(level, i) for i in range(math.ceil(len(leaves) / f ** level))]

    def send_leaf(mid, store):
        i = index[mid]
        return [(node(1, i // f), up, (i, tuple(leaf_value(mid, store))))]

    cl.step(send_leaf, leaves)
    for level in range(1, depth):
        def send_up(mid, store):
            children = sorted(store[up])
            store[up] = children
            total = tuple(sum(v[k] for _, v in children) for k in range(width))
            return [(node(level + 1, mid[3] // f), up, (mid[3], total))]

        cl.step(send_up, level_nodes(level))
    for level in range(depth, 0, -1):
        def send_down(mid, store, level=level):
            children = sorted(store.pop(up))
            if level == depth:
                grand = tuple(sum(v[k] for _, v in children) for k in range(width))
                run = (0,) * width
            else:
                run, grand = store.pop(down)[0]
            msgs = []
            for ci, vec in children:
                if level == 1:
                    msgs.append((leaves[ci], out_key, (run, grand)))
                else:
                    msgs.append((node(level - 1, ci), down, (run, grand)))
                run = _add(run, vec)
            return msgs

        cl.step(send_down, level_nodes(level))


def reduce_to(cl: Cluster, leaves: Sequence[MachineId], leaf_value: Callable[[MachineId, Store], Any],
              combine: Callable[[List[Any]], Any], target: MachineId, out_key: str, tag: str,
              width: int, depth: Optional[int] = None) -> None:
    """Fold leaf values (in leaf order) up a tree whose root is ``target``.

    ``combine`` must be associative over ordered lists.  The root ends with
    ``store[out_key] = value``.  Takes ``depth + 1`` steps.
    """
    reduce_many(cl, {target: leaves}, leaf_value, combine, out_key, tag, width, depth)


def reduce_many(cl: Cluster, groups: Dict[MachineId, Sequence[MachineId]],
                leaf_value: Callable[[MachineId, Store], Any], combine: Callable[[List[Any]], Any],
                out_key: str, tag: str, width: int, depth: Optional[int] = None) -> None:
    """Several independent reductions (target -> leaves) advanced in the same steps.

    All groups use the depth of the largest one.  A fixed ``depth`` sets the
    fan-in to ``ceil(L ** (1 / depth))`` for the largest group size L instead
    of deriving it from the cap, so the step count is ``depth + 1`` whatever
    the sizes.
    """
    largest = max((len(ls) for ls in groups.values()), default=1)
    if depth is None:
        f = fan(cl.cap, width + 1)
        depth = tree_depth(largest, f)
    else:
        f = max(2, math.ceil(largest ** (1 / depth) - 1e-9))
    up = f"_up_{tag}"
    names = {target: g for g, target in enumerate(groups)}

    def node(target: MachineId, level: int, i: int) -> MachineId:
        return target if level == depth else ("tree", tag, names[target], level, i)

    owner: Dict[MachineId, Tuple[MachineId, int]] = {}
    for target, ls in groups.items():
        for i, mid in enumerate(ls):
            owner[mid] = (target, i)

    def send_leaf(mid, store):
        target, i = owner[mid]
        return [(node(target, 1, i // f), up, (i, leaf_value(mid, store)))]

    cl.step(send_leaf, list(owner))
    for level in range(1, depth):
        nodes = {}
        for target, ls in groups.items():
            for i in range(math.ceil(len(ls) / f ** level)):
                nodes[node(target, level, i)] = (target, i)

        def send_up(mid, store, level=level, nodes=nodes):
            target, i = nodes[mid]
            children = sorted(store.pop(up), key=lambda t: t[0])
            return [(node(target, level + 1, i // f), up, (i, combine([v for _, v in children])))]

        cl.step(send_up, list(nodes))

    def finish(mid, store):
        children = sorted(store.pop(up), key=lambda t: t[0])
        store[out_key] = combine([v for _, v in children])

    cl.step(finish, [t for t, ls in groups.items() if ls])


BROADCAST_DEPTH = 2


def broadcast(cl: Cluster, sources: Dict[MachineId, Sequence[MachineId]], payload_key: str,
              out_key: str, tag: str, consume: bool = False, depth: int = BROADCAST_DEPTH) -> None:
    """Copy each source's ``store[payload_key]`` into its destinations' ``store[out_key]`` lists.

    Every source uses a tree of exactly ``depth`` levels whose fan-out is
    ``ceil(D ** (1 / depth))`` for D destinations, so the step count is
    ``depth`` whatever the sizes.  With ``consume`` a source drops the
    payload once sent.
    """
    relay_key = f"_relay_{tag}"
    holders: Dict[MachineId, List[MachineId]] = {src: list(ds) for src, ds in sources.items() if ds}
    counter = 0
    for level in range(depth):
        plan: Dict[MachineId, List[Tuple[MachineId, str]]] = {}
        nxt: Dict[MachineId, List[MachineId]] = {}
        for h, ds in holders.items():
            if level == depth - 1:
                plan[h] = [(d, out_key) for d in ds]
                continue
            remaining = depth - level
            f = max(1, math.ceil(len(ds) ** (1 / remaining) - 1e-9))
            size = math.ceil(len(ds) / f)
            plan[h] = []
            for g in range(0, len(ds), size):
                relay = ("relay", tag, level, counter)
                counter += 1
                plan[h].append((relay, relay_key))
                nxt[relay] = ds[g:g + size]

        def send(mid, store):
            if mid in sources:
                payload = store.pop(payload_key) if consume else store[payload_key]
            else:
                payload = store.pop(relay_key)[0]
            return [(d, key, payload) for d, key in plan[mid]]

        cl.step(send, list(holders))
        holders = nxt


# permutations spread over machines -----------------------------------------------


def perm_machine(name: str, i: int) -> MachineId:
    return ("perm", name, i)


def distribute_permutation(cl: Cluster, p: Permutation, name: str) -> List[MachineId]:
    """Machine i gets the values at block i's positions and the positions of block i's elements."""
    layout = cl.cfg.layout
    ids = []
    for i in range(layout.count):
        lo, hi = layout.start(i), layout.end(i)
        mid = perm_machine(name, i)
        cl.place(mid, "fwd", tuple(p.forward[lo - 1:hi - 1]))
        cl.place(mid, "inv", tuple(p.inverse[e - 1] + 1 for e in range(lo, hi)))
        ids.append(mid)
    return ids


def distribute_weights(cl: Cluster, w: Sequence[float], name: str) -> List[MachineId]:
    """Weight of each element, co-located with the element's inverse block."""
    layout = cl.cfg.layout
    ids = []
    for i in range(layout.count):
        mid = perm_machine(name, i)
        cl.place(mid, "w", tuple(float(x) for x in w[layout.start(i) - 1:layout.end(i) - 1]))
        ids.append(mid)
    return ids


def collect_blocks(cl: Cluster, prefix: str, key: str, count: int, name=None) -> List[Any]:
    """Concatenate a per-block tuple held at ``(prefix, [name,] i)`` for i < count."""
    out: List[Any] = []
    for i in range(count):
        mid = (prefix, name, i) if name is not None else (prefix, i)
        out.extend(cl.read(mid)[key])
    return out
