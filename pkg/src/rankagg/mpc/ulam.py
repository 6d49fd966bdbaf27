"""Distributed median reconstruction for five permutations.

Phase 1 puts one tuple of windows on each machine and reconstructs its
candidate block there.  Phase 2 runs the stitching program on a single
machine that only sees per-tuple summaries.  Phase 3 sends the chosen block
texts to the machines holding the intermediate string, and Phase 4 trims
and fills the dummies with a prefix sum and rank pairing.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from ..perm import Instance, InvalidInputError, Permutation
from ..reconstruct import (DUMMY, BlockSummary, InvariantViolation, ReconstructParams, ReconstructTrace,
                           block_reconstruction, compose_blocks, indel, tuple_schedule, window_grid)
from .engine import Cluster, MpcConfig, MpcTrace, run_program
from .medians import _block, _output
from .primitives import prefix_sum

DP = ("dp",)


def _flat_windows(windows) -> Tuple[int, ...]:
    return tuple(x for w in windows for x in w)


def _unflat(flat) -> tuple:
    return tuple((flat[i], flat[i + 1]) for i in range(0, len(flat), 2))


def mpc_ulam_reconstruct(Q: Instance, params: Optional[ReconstructParams], cfg: MpcConfig
                         ) -> Tuple[Optional[Permutation], MpcTrace]:
    """Same output as the offline reconstruction.

    The stitching machine holds every tuple summary; unless ``cfg.relaxed``
    exempts it, that machine is held to the word cap like any other.
    Tuple placement (which windows each Phase-1 machine receives) counts as
    input placement and the tuple schedule is logged as an oracle call.
    """
    params = params or ReconstructParams()
    if Q.m != 5:
        raise InvalidInputError(f"reconstruction expects five permutations, got {Q.m}")
    if Q.n != cfg.n:
        raise InvalidInputError(f"instance has n={Q.n} but the cluster is sized for n={cfg.n}")
    n = Q.n
    grid = window_grid(n, params)
    layout = grid.layout
    size = layout.size
    b = cfg.layout.size
    schedule, truncated = [], []
    for j in range(layout.count):
        tuples, trunc = tuple_schedule(Q, grid, j, params.tuple_cap)
        schedule.append(tuples)
        truncated.append(trunc)
    exempt = [DP] if cfg.relaxed else []
    details: Dict[str, object] = {}

    def program(cl: Cluster):
        cl.oracle("tuple-schedule", sum(len(W) for W in grid.windows) * 5)
        tuple_ids = []
        for j, tuples in enumerate(schedule):
            for a, tup in enumerate(tuples):
                mid = ("tuple", j, a)
                cl.place(mid, "subs", tuple(Q[i].forward[s - 1:e - 1] for i, (s, e) in enumerate(tup)))
                cl.place(mid, "windows", _flat_windows(tup))
                tuple_ids.append(mid)

        # Phase 1: one candidate block per tuple machine
        def reconstruct(mid, store):
            subs = store.pop("subs")
            text = block_reconstruction(subs, size)
            store["text"] = text
            objective = sum(indel(text, sub) for sub in subs)
            return [(DP, "summary", (mid[1], mid[2]) + store["windows"] + (len(text), objective))]

        cl.step(reconstruct, tuple_ids)

        # Phase 2: stitching over summaries only, then traceback orders
        def stitch(mid, store):
            per_block: List[List[BlockSummary]] = [[] for _ in range(layout.count)]
            for entry in sorted(store.pop("summary")):
                j, a = entry[0], entry[1]
                per_block[j].append(BlockSummary(j, _unflat(entry[2:12]), entry[12], entry[13]))
            comp = compose_blocks(per_block, n, size)
            chosen = {j: a for j, a in comp.chosen}
            details["blockED"] = comp.value
            details["chosen"] = [[j, a] for j, a in comp.chosen]
            lengths = [per_block[j][chosen[j]].length if j in chosen else size for j in range(layout.count)]
            total = sum(lengths)
            if total < n:
                raise InvariantViolation(f"intermediate string has length {total} < {n}")
            mids = [("mid", t) for t in range((total + b - 1) // b)]
            msgs = [(m, "excess", total - n) for m in mids]
            offset = 1
            for j in range(layout.count):
                if j in chosen:
                    msgs.append((("tuple", j, chosen[j]), "go", offset))
                else:
                    lo, hi = offset, offset + size
                    while lo < hi:
                        t = _block(lo, b)
                        cut = min(hi, (t + 1) * b + 1)
                        msgs.append((("mid", t), "dummies", (lo, cut)))
                        lo = cut
                offset += lengths[j]
            return msgs

        cl.step(stitch, [DP])

        # Phase 3: chosen texts move to the intermediate-string machines
        def deliver(mid, store):
            if "go" not in store:
                store.clear()
                return []
            start = store.pop("go")[0]
            text = store.pop("text")
            store.clear()
            return [(("mid", _block(start + t, b)), "cells", (start + t, v)) for t, v in enumerate(text)]

        cl.step(deliver, tuple_ids)
        mids = cl.machines("mid")
        elems = [("elem", i) for i in range(cfg.layout.count)]

        # Phase 4: trim leftmost dummies, fill the rest with unused elements ascending
        def assemble(mid, store):
            cells = dict(store.pop("cells", []))
            for lo, hi in store.pop("dummies", []):
                for pos in range(lo, hi):
                    cells[pos] = DUMMY
            store["cells"] = sorted(cells.items())
            return [(("elem", _block(v, b)), "present", v) for _, v in store["cells"] if v != DUMMY]

        cl.step(assemble, mids)

        def unused(mid, store):
            present = store.pop("present", [])
            if len(set(present)) != len(present):
                raise InvariantViolation("intermediate string repeats an element")
            seen = set(present)
            store["unused"] = [e for e in range(cfg.layout.start(mid[1]), cfg.layout.end(mid[1])) if e not in seen]

        cl.step(unused, elems)

        def count(mid, store):
            if mid[0] == "mid":
                return (sum(1 for _, v in store["cells"] if v == DUMMY), 0)
            return (0, len(store["unused"]))

        prefix_sum(cl, mids + elems, count, "offset", "postprocess", 2)

        def place(mid, store):
            (dummies_before, unused_before), _ = store.pop("offset")[0]
            if mid[0] == "elem":
                return [(("rank", (unused_before + t) // b), "item", (unused_before + t, e))
                        for t, e in enumerate(store.pop("unused"))]
            excess = store.pop("excess")[0]
            msgs = []
            seen = dummies_before
            for pos, v in store.pop("cells"):
                if v == DUMMY:
                    seen += 1
                    if seen <= excess:
                        continue
                new_pos = pos - min(seen, excess)
                if v == DUMMY:
                    r = seen - 1 - excess
                    msgs.append((("rank", r // b), "slot", (r, new_pos)))
                else:
                    msgs.append((("out", _block(new_pos, b)), "cells", (new_pos, v)))
            return msgs

        cl.step(place, mids + elems)

        def pair(mid, store):
            slots = dict(store.pop("slot", []))
            items = dict(store.pop("item", []))
            return [(("out", _block(slots[r], b)), "cells", (slots[r], items[r])) for r in sorted(slots)]

        cl.step(pair, cl.machines("rank"))
        return _output(cl, n)

    perm, trace = run_program(program, cfg, exempt)
    chosen = [(j, schedule[j][a]) for j, a in details.get("chosen", [])]
    trace.details.update(ReconstructTrace([len(t) for t in schedule], truncated,
                                          details.get("blockED", -1), chosen).to_json())
    return perm, trace
