import math

import pytest

from conftest import perm
from rankagg.generate import random_permutation
from rankagg.mpc import CapViolation, Cluster, MachineBudgetExceeded, MpcConfig, MpcTrace, run_program, words
from rankagg.mpc.primitives import (broadcast, collect_blocks, distribute_permutation, prefix_sum,
                                    reduce_many, reduce_to, tree_depth)
from rankagg.perm import InvalidInputError, Permutation


def test_word_counting():
    assert words(None) == 0
    assert words(7) == words(2.5) == words("tag") == 1
    assert words((1, 2, (3, 4))) == 4
    assert words({1: (2, 3)}) == 3
    assert words([]) == 0


def test_config_cap_formula():
    cfg = MpcConfig(16)
    # 4 * 16^(1/2) * ceil(log2 16)
    assert cfg.word_cap == 64
    assert MpcConfig(64, kappa=0).word_cap == 32
    with pytest.raises(InvalidInputError):
        MpcConfig(16, c=0.01)
    with pytest.raises(InvalidInputError):
        MpcConfig(16, epsilon=1.0)


def test_empty_program():
    out, trace = run_program(lambda cl: "done", MpcConfig(16))
    assert out == "done"
    assert trace.rounds == 0 and trace.failed is None and trace.machines_used == 0


def test_distribute_permutation_layout(rng):
    cfg = MpcConfig(16)
    p = random_permutation(rng, 16)

    def program(cl):
        ids = distribute_permutation(cl, p, "p")
        fwd = collect_blocks(cl, "perm", "fwd", len(ids), "p")
        inv = collect_blocks(cl, "perm", "inv", len(ids), "p")
        return ids, fwd, inv, [sum(words(v) for v in cl.read(m).values()) for m in ids]

    (ids, fwd, inv, sizes), trace = run_program(program, cfg)
    assert len(ids) == 4 and sizes == [8] * 4
    assert tuple(fwd) == p.forward
    assert [x - 1 for x in inv] == list(p.inverse)
    assert trace.peak_words == 8


def test_single_machine_when_block_covers_everything():
    # ceil(n^eps) blocks, so only n = 1 gives a block as large as n
    cfg = MpcConfig(1, epsilon=0.01)
    assert cfg.layout.count == 1 and cfg.layout.size == 1

    def program(cl):
        return distribute_permutation(cl, perm(1), "p")

    ids, _ = run_program(program, cfg)
    assert len(ids) == 1


def test_prefix_sum_over_sixteen_machines():
    cfg = MpcConfig(64)
    leaves = [("leaf", i) for i in range(16)]

    def program(cl):
        for i, mid in enumerate(leaves):
            cl.place(mid, "v", i + 1)
        prefix_sum(cl, leaves, lambda mid, store: (store["v"],), "out", "ps", 1)
        return [cl.read(m)["out"][0] for m in leaves]

    out, trace = run_program(program, cfg)
    assert [o[0][0] for o in out] == [i * (i + 1) // 2 for i in range(16)]
    assert all(o[1] == (136,) for o in out)
    assert trace.rounds == math.ceil(math.log(16, cfg.word_cap)) + 1 == 2


def test_prefix_sum_rounds_grow_with_depth():
    cfg = MpcConfig(16, c=1)
    leaves = [("leaf", i) for i in range(40)]
    # width 1: fan-in min((16 - 2) // 2, 16 // 2) = 7, so two levels cover 40 leaves
    depth = tree_depth(len(leaves), 7)
    assert depth == 2

    def program(cl):
        for i, mid in enumerate(leaves):
            cl.place(mid, "v", 1)
        prefix_sum(cl, leaves, lambda mid, store: (store["v"],), "out", "ps", 1)
        return [cl.read(m)["out"][0][0][0] for m in leaves]

    out, trace = run_program(program, cfg)
    assert out == list(range(40))
    assert trace.rounds == 2 * depth


def test_reduce_to_fixed_depth():
    cfg = MpcConfig(64)
    leaves = [("leaf", i) for i in range(50)]

    def program(cl):
        for i, mid in enumerate(leaves):
            cl.place(mid, "v", i)
        reduce_to(cl, leaves, lambda mid, s: s["v"], sum, ("root",), "total", "r", 1, depth=2)
        return cl.read(("root",))["total"]

    total, trace = run_program(program, cfg)
    assert total == sum(range(50)) and trace.rounds == 3


def test_reduce_many_keeps_groups_apart():
    cfg = MpcConfig(64)
    groups = {("t", g): [("leaf", g, i) for i in range(3 + 4 * g)] for g in range(4)}

    def program(cl):
        for ls in groups.values():
            for mid in ls:
                cl.place(mid, "v", (mid[2], mid[1]))
        reduce_many(cl, groups, lambda mid, s: [s["v"]], lambda xs: [v for x in xs for v in x], "all", "rm", 2, 2)
        return {t: cl.read(t)["all"] for t in groups}

    out, trace = run_program(program, cfg)
    for (_, g), vals in out.items():
        assert vals == [(i, g) for i in range(3 + 4 * g)]
    assert trace.rounds == 3


def test_broadcast_has_fixed_depth():
    cfg = MpcConfig(64)
    dests = [("d", i) for i in range(30)]

    def program(cl):
        cl.place(("src",), "x", (1, 2))
        broadcast(cl, {("src",): dests}, "x", "got", "b")
        return [cl.read(d)["got"] for d in dests]

    out, trace = run_program(program, cfg)
    assert all(o == [(1, 2)] for o in out)
    assert trace.rounds == 2


def test_injected_cap_fault_reports_locus():
    cfg = MpcConfig(16)

    def program(cl):
        half = cl.cap // 2 + 1
        cl.place(("a",), "x", 1)
        cl.step(lambda mid, s: [(("b", 0), "y", 0), (("b", 1), "y", 1)])
        cl.step(lambda mid, s: [(("victim",), "z", (0,) * half)], [("b", 0), ("b", 1)])
        return "unreachable"

    out, trace = run_program(program, cfg)
    assert out is None
    assert trace.failed == {"machine": "victim", "round": 2}


def test_oversized_outbox_fails():
    cfg = MpcConfig(16)

    def program(cl):
        cl.place(("a",), "x", 1)
        cl.step(lambda mid, s: [(("b", i), "y", (0,) * 10) for i in range(10)])

    out, trace = run_program(program, cfg)
    assert out is None and trace.failed["machine"] == "a"


def test_cap_violation_raised_inside_cluster():
    cl = Cluster(MpcConfig(16))
    with pytest.raises(CapViolation) as err:
        cl.place(("m",), "big", tuple(range(100)))
    assert err.value.machine == ("m",) and err.value.cap == 64


def test_machine_budget():
    cl = Cluster(MpcConfig(16, machine_budget=3))
    for i in range(3):
        cl.place(("m", i), "x", 1)
    with pytest.raises(MachineBudgetExceeded):
        cl.place(("m", 3), "x", 1)


def test_exempt_machines_need_relaxed_flag():
    with pytest.raises(InvalidInputError):
        Cluster(MpcConfig(16), exempt=[("dp",)])
    cl = Cluster(MpcConfig(16, relaxed=True), exempt=[("dp",)])
    cl.place(("dp",), "big", tuple(range(500)))
    assert cl.trace.exempt_words == {"dp": 500} and cl.trace.peak_words == 0


def test_messages_delivered_in_sender_order():
    cfg = MpcConfig(16)

    def program(cl):
        for i in (3, 1, 2):
            cl.place(("s", i), "v", i)
        cl.step(lambda mid, s: [(("sink",), "in", s["v"]), (("sink",), "in", -s["v"])])
        return cl.read(("sink",))["in"]

    out, _ = run_program(program, cfg)
    assert out == [1, -1, 2, -2, 3, -3]


def test_trace_json_round_trip():
    t = MpcTrace(rounds=4, machines_used=9, peak_words=12, total_words=40, total_messages=7,
                 oracle_calls=[{"kind": "ulam-distance", "wordCharge": 99}], failed={"machine": "x", "round": 2},
                 exempt_words={"dp": 5}, details={"k": [1, 2]})
    data = t.to_json()
    assert set(data) >= {"rounds", "machinesUsed", "peakWordsPerMachine", "totalWords", "oracleCalls", "failed"}
    assert MpcTrace.from_json(data) == t
    plain = MpcTrace(rounds=1)
    assert "failed" not in plain.to_json()
    assert MpcTrace.from_json(plain.to_json()) == plain


def test_trace_composition():
    a = MpcTrace(rounds=3, machines_used=4, peak_words=10, total_words=5, total_messages=2)
    b = MpcTrace(rounds=5, machines_used=2, peak_words=7, total_words=1, total_messages=1,
                 oracle_calls=[{"kind": "x", "wordCharge": 1}])
    par = MpcTrace.parallel([a, b])
    assert (par.rounds, par.machines_used, par.peak_words, par.total_words) == (5, 6, 10, 6)
    seq = a.then(b)
    assert (seq.rounds, seq.machines_used, seq.peak_words, seq.total_messages) == (8, 4, 10, 3)
    assert seq.oracle_calls == [{"kind": "x", "wordCharge": 1}]


def test_runs_are_deterministic(rng):
    p = random_permutation(rng, 64)

    def program(cl):
        distribute_permutation(cl, p, "p")
        cl.step(lambda mid, s: [(("sum",), "v", sum(s["fwd"]))])
        return sum(cl.read(("sum",))["v"])

    a, ta = run_program(program, MpcConfig(64))
    b, tb = run_program(program, MpcConfig(64))
    assert a == b == 64 * 65 // 2 and ta == tb
