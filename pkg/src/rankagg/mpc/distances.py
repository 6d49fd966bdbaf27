"""Distances between two distributed permutations."""

from __future__ import annotations

import bisect
import math
from typing import List, Optional, Sequence, Tuple

from ..perm import InvalidInputError, Metric, Permutation, ulam
from .engine import Cluster, MpcConfig, MpcTrace, run_program
from .primitives import broadcast, distribute_permutation, distribute_weights, perm_machine, reduce_to

RESULT = ("result",)


def _sum(values: List[float]):
    total = 0
    for v in values:
        total += v
    return total


def ulam_oracle_charge(n: int, epsilon: float) -> int:
    """Would-be space of an external distributed edit-distance routine."""
    return math.ceil(n ** (1 + epsilon)) * math.ceil(math.log2(max(n, 2)))


def _hamming_like(cl: Cluster, K: int, weighted: bool, family: str) -> None:
    """Hamming counts elements whose positions differ; footrule sums position gaps."""
    key = "qinv" if family == "hamming" else "qfwd"
    src = "inv" if family == "hamming" else "fwd"

    def ship(mid, store):
        return [(perm_machine("p", mid[2]), key, store[src])]

    cl.step(ship, [perm_machine("q", i) for i in range(K)])

    def partial(mid, store):
        theirs = store.pop(key)[0]
        if family == "footrule":
            return _sum([abs(a - b) for a, b in zip(store["fwd"], theirs)])
        ws = store.get("w")
        return _sum([(1 if ws is None else ws[k]) for k, (a, b) in enumerate(zip(store["inv"], theirs)) if a != b])

    reduce_to(cl, [perm_machine("p", i) for i in range(K)], partial, _sum, RESULT, "value", "sum", 1)


def _kendall(cl: Cluster, K: int, weighted: bool) -> None:
    """Relabel q through p, then count inversions per block and per block pair."""
    b = cl.cfg.layout.size

    def request(mid, store):
        base = mid[2] * b
        return [(perm_machine("p", (e - 1) // b), "req", (base + k + 1, e)) for k, e in enumerate(store["fwd"])]

    cl.step(request, [perm_machine("q", i) for i in range(K)])

    def answer(mid, store):
        lo = mid[2] * b + 1
        out = []
        for k, e in store.pop("req"):
            entry = (k, store["inv"][e - lo]) if not weighted else (k, store["inv"][e - lo], store["w"][e - lo])
            out.append((("rel", (k - 1) // b), "rel", entry))
        return out

    cl.step(answer, [perm_machine("p", i) for i in range(K)])

    def settle(mid, store):
        entries = sorted(store.pop("rel"))
        vals = tuple(e[1] for e in entries)
        wts = tuple(e[2] for e in entries) if weighted else None
        store["blk"] = (mid[1], vals, wts)
        store["internal"] = _internal(vals, wts)

    rel = [("rel", i) for i in range(K)]
    cl.step(settle, rel)
    pairs = [("pair", i, j) for i in range(K) for j in range(i + 1, K)]
    targets = {("rel", i): [p for p in pairs if i in p[1:]] for i in range(K)}
    broadcast(cl, targets, "blk", "blks", "kendall")

    def leaf(mid, store):
        if mid[0] == "rel":
            return store.pop("internal")
        (_, left, lw), (_, right, rw) = sorted(store.pop("blks"), key=lambda t: t[0])
        return _cross(left, lw, right, rw)

    reduce_to(cl, rel + pairs, leaf, _sum, RESULT, "value", "sum", 1)


def _internal(vals: Sequence[int], wts: Optional[Sequence[float]]):
    total = 0
    for a in range(len(vals)):
        for c in range(a + 1, len(vals)):
            if vals[a] > vals[c]:
                total += 1 if wts is None else (wts[a] + wts[c]) / 2
    return total


def _cross(left: Sequence[int], lw, right: Sequence[int], rw):
    """Pairs (x in left, y in right) with x > y; left precedes right in q."""
    order = sorted(range(len(right)), key=lambda k: right[k])
    keys = [right[k] for k in order]
    if lw is None:
        return _sum([bisect.bisect_left(keys, x) for x in left])
    prefix = [0.0]
    for k in order:
        prefix.append(prefix[-1] + rw[k])
    total = 0.0
    for x, wx in zip(left, lw):
        c = bisect.bisect_left(keys, x)
        total += (c * wx + prefix[c]) / 2
    return total


def mpc_distance(metric: Metric, p: Permutation, q: Permutation, cfg: MpcConfig,
                 w: Optional[Sequence[float]] = None) -> Tuple[Optional[float], MpcTrace]:
    """Distance between two permutations held block-wise; Ulam metrics return the indel distance."""
    if p.n != q.n or p.n != cfg.n:
        raise InvalidInputError("dimension mismatch")
    if metric.weighted and w is None:
        raise InvalidInputError(f"{metric.value} needs weights")
    family = metric.family
    if family == "footrule" and metric.weighted:
        raise InvalidInputError("footrule has no weighted variant")
    weighted = metric.weighted
    K = cfg.layout.count

    def program(cl: Cluster):
        distribute_permutation(cl, p, "p")
        distribute_permutation(cl, q, "q")
        if weighted:
            distribute_weights(cl, w, "p")
        if family == "ulam":
            cl.oracle("ulam-distance", ulam_oracle_charge(cfg.n, cfg.epsilon))
            return float(ulam(p, q, w if weighted else None).indel)
        if family in ("hamming", "footrule"):
            _hamming_like(cl, K, weighted, family)
        else:
            _kendall(cl, K, weighted)
        return float(cl.read(RESULT)["value"])

    return run_program(program, cfg)


def kendall_machine_count(cfg: MpcConfig) -> int:
    """Machines used by the Kendall layout.

    Two input copies plus relabelled blocks (3 per block), one machine per
    unordered block pair, the relays of each block's two-level broadcast to
    its K-1 pair machines, and the result machine.  Assumes the final sum
    fits a single tree node, which holds whenever K(K+1)/2 <= cap/2.
    """
    K = cfg.layout.count
    relays = 0
    if K > 1:
        d = K - 1
        fanout = math.ceil(d ** 0.5 - 1e-9)
        relays = K * math.ceil(d / math.ceil(d / fanout))
    return 3 * K + K * (K - 1) // 2 + relays + 1
