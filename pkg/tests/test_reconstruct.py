import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import perm
from strategies import permutations
from rankagg.generate import planted_instance, random_permutation, uniform_instance
from rankagg.oracles import BudgetExceeded, composition_objective, exact_median, exhaustive_composition
from rankagg.perm import Instance, InvalidInputError, Metric, Permutation, canonical_alignment, cost, ulam
from rankagg.reconstruct import (DUMMY, AnalysisRegimeWarning, BlockSummary, InvariantViolation, ReconstructParams,
                                 block_layout, block_reconstruction, compose_blocks, enumerate_candidates, indel,
                                 postprocess, scalable_median_reconstruct, window_grid)
from rankagg.slack import total_slack

pytestmark = pytest.mark.filterwarnings("ignore::rankagg.reconstruct.AnalysisRegimeWarning")

PARAMS = ReconstructParams()


# parameters and layout ------------------------------------------------------------


def test_large_rho_warns():
    with pytest.warns(AnalysisRegimeWarning):
        ReconstructParams(rho=0.25)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ReconstructParams(rho=0.1)


@pytest.mark.parametrize("kwargs", [dict(epsilon=0), dict(epsilon=1), dict(rho=0), dict(tuple_cap=0)])
def test_param_validation(kwargs):
    with pytest.raises(InvalidInputError):
        ReconstructParams(**kwargs)


@pytest.mark.parametrize("n", [1, 2, 5, 10, 16, 17, 30, 64, 100])
def test_layout_covers_all_positions(n):
    L = block_layout(n, 0.5)
    assert L.count * L.size >= n
    assert L.end(L.count - 1) == n + 1
    assert all(L.length(j) >= 1 for j in range(L.count))
    assert [L.block_of(p) for p in range(1, n + 1)] == sorted(L.block_of(p) for p in range(1, n + 1))


# window grid ----------------------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 3, 9, 16, 20])
def test_windows_within_bounds(n):
    grid = window_grid(n, PARAMS)
    for j in range(grid.layout.count):
        for s, e in grid.windows[j] + grid.degenerate[j]:
            assert 1 <= s <= e <= n + 1
        assert all(s == e for s, e in grid.degenerate[j])


def _direct_windows(n, j, rho, eps):
    """Re-enumerate one block's grid by walking scales and exponents instead of taking logarithms."""
    K = math.ceil(n ** eps)
    b = math.ceil(n / K)
    ell = 1 + j * b
    blen = min(b, n - j * b)
    growth = 1 + rho
    scales = [1.0]
    while scales[-1] < 2 * n:
        scales.append(scales[-1] * growth)
    wins, starts = set(), set()
    for scale in scales:
        g = max(1, math.floor(rho * scale / n ** eps))
        rel = {blen}
        a = 0
        while growth ** a <= min(blen / rho, scale):
            rel.add(blen + math.floor(growth ** a))
            a += 1
        top = 0
        while growth ** top < blen - rho * blen:
            top += 1
        for a in range(top + 1):
            rel.add(blen - math.ceil(growth ** a))
        for s in range(1, n + 2):
            if ell - scale <= s <= ell + scale and s % g == 0:
                starts.add(s)
                for r in rel:
                    e = min(s + r, n + 1)
                    if e >= s:
                        wins.add((s, e))
    return wins, {(s, s) for s in starts}


@pytest.mark.parametrize("j", range(4))
def test_grid_matches_direct_enumeration(j):
    grid = window_grid(16, PARAMS)
    wins, degenerate = _direct_windows(16, j, 0.25, 0.5)
    assert set(grid.windows[j]) == wins
    assert set(grid.degenerate[j]) == degenerate
    assert len(grid.windows[j]) == len(wins) and len(grid.degenerate[j]) == len(degenerate)


def test_first_block_sizes_at_sixteen():
    grid = window_grid(16, PARAMS)
    wins, degenerate = _direct_windows(16, 0, 0.25, 0.5)
    assert (len(grid.windows[0]), len(grid.degenerate[0])) == (len(wins), len(degenerate))


def _aligned_intervals(y, pi, layout):
    """Tile [1, n+1) of pi by an optimal alignment with y: block j owns pi up to its last matched element."""
    matched = canonical_alignment(y, pi)
    bounds = []
    for j in range(layout.count):
        last = 0
        for pos in range(1, layout.start(j)):
            e = y.forward[pos - 1]
            if e in matched:
                last = pi.position(e) + 1
        bounds.append(last + 1)
    bounds.append(y.n + 1)
    return [(bounds[j], bounds[j + 1]) for j in range(layout.count)]


def test_medium_intervals_have_approximating_windows():
    rho, eps = PARAMS.rho, PARAMS.epsilon
    checked = 0
    for seed in range(60):
        n = (16, 25, 36)[seed % 3]
        pl = planted_instance(n, 5, 1 + seed % 3, seed)
        y = pl.center
        grid = window_grid(n, PARAMS)
        L = grid.layout
        for pi in pl.instance.perms:
            ed = ulam(y, pi).indel
            scale = 1.0
            while scale < ed:
                scale *= 1 + rho
            g = rho * scale / n ** eps
            for j, (a, b) in enumerate(_aligned_intervals(y, pi, L)):
                if not a + g + rho * L.length(j) < b <= a + L.length(j) / rho:
                    continue
                checked += 1
                d = indel(y.forward[L.start(j) - 1:L.end(j) - 1], pi.forward[a - 1:b - 1])
                assert any(a <= s <= a + g and b - g - rho * d <= e <= b for s, e in grid.windows[j]), (seed, j)
    assert checked > 100


def test_tuples_are_lazy_and_distinct():
    grid = window_grid(16, PARAMS)
    it = grid.tuples(0)
    first = list(itertools.islice(it, 50))
    assert len(set(first)) == 50
    for tup in first:
        assert sum(1 for s, e in tup if s == e and (s, e) not in grid.windows[0]) <= 1


def test_tuples_cover_the_grouping_exactly_on_a_tiny_grid():
    grid = window_grid(3, ReconstructParams(epsilon=0.5, rho=1.0))
    for j in range(grid.layout.count):
        W, SW = grid.windows[j], grid.all_degenerate
        expected = set(itertools.product(W, repeat=5))
        for k in range(5):
            for mid in SW:
                for rest in itertools.product(W, repeat=4):
                    expected.add(rest[:k] + (mid,) + rest[k:])
        got = list(grid.tuples(j))
        assert len(got) == len(set(got)) == len(expected)
        assert set(got) == expected


# block reconstruction ----------------------------------------------------------------------


def test_block_of_copies():
    assert block_reconstruction([(1, 2, 3)] * 5, 3) == (1, 2, 3)


def test_rare_element_dropped():
    strings = [(1, 2, 9), (1, 2, 9), (1, 9, 2), (1, 2), (2, 1)]
    out = block_reconstruction(strings, 2)
    assert 9 not in out
    assert out == (1, 2)


def test_tied_pair_becomes_dummies():
    assert block_reconstruction([(1, 2), (1, 2), (2, 1), (2, 1), ()], 2) == (DUMMY, DUMMY)


def test_block_padding_and_validity(rng):
    for _ in range(100):
        n = int(rng.integers(1, 10))
        strings = []
        for _ in range(5):
            p = random_permutation(rng, n).forward
            s = int(rng.integers(0, n + 1))
            strings.append(p[s:s + int(rng.integers(0, n + 1))])
        size = int(rng.integers(1, 6))
        out = block_reconstruction(strings, size)
        real = [e for e in out if e != DUMMY]
        assert len(out) >= size and len(set(real)) == len(real)
        for e in real:
            assert sum(e in s for s in strings) >= 4


def test_block_reconstruction_needs_five():
    with pytest.raises(InvalidInputError):
        block_reconstruction([(1,)] * 4, 1)


def test_indel_counts_dummies_as_unmatched():
    assert indel((1, 2, 3), (1, 2, 3)) == 0
    assert indel((DUMMY, DUMMY), ()) == 2
    assert indel((1, DUMMY), (1, 0)) == 2
    assert indel((2, 1), (1, 2)) == 2


# stitching ---------------------------------------------------------------------------------------


def test_all_blocks_empty():
    for K, size, n in ((1, 4, 4), (3, 3, 9), (4, 4, 14)):
        comp = compose_blocks([[] for _ in range(K)], n, size)
        assert comp.value == 5 * (K * size + n) and comp.chosen == []


def _tile(j, size, objective=0):
    w = (1 + j * size, 1 + (j + 1) * size)
    return BlockSummary(j, (w,) * 5, size, objective)


def test_zero_cost_tiling_is_chosen():
    n, size = 9, 3
    decoy = BlockSummary(1, ((2, 5),) * 5, 3, 1)
    cands = [[_tile(0, size)], [decoy, _tile(1, size)], [_tile(2, size)]]
    comp = compose_blocks(cands, n, size)
    assert comp.value == 0
    assert comp.chosen == [(0, 0), (1, 1), (2, 0)]


@given(st.data())
def test_dp_equals_exhaustive_search(data):
    n = data.draw(st.integers(1, 10))
    K = data.draw(st.integers(1, 3))
    size = max(1, math.ceil(n / K))
    cands = []
    for j in range(K):
        block = []
        for _ in range(data.draw(st.integers(0, 4))):
            wins = []
            for _ in range(5):
                s = data.draw(st.integers(1, n + 1))
                wins.append((s, data.draw(st.integers(s, n + 1))))
            block.append(BlockSummary(j, tuple(wins), 0, data.draw(st.integers(0, 3 * n))))
        cands.append(block)
    comp = compose_blocks(cands, n, size)
    assert comp.value == exhaustive_composition(cands, n, size)
    picks = [None] * K
    for j, a in comp.chosen:
        picks[j] = a
    assert composition_objective(cands, picks, n, size) == comp.value


def test_dp_on_real_candidates(rng):
    small = ReconstructParams(tuple_cap=4)
    for _ in range(20):
        n = int(rng.integers(2, 10))
        Q = planted_instance(n, 5, int(rng.integers(0, 3)), int(rng.integers(1 << 40))).instance
        grid = window_grid(n, small)
        cands = [enumerate_candidates(Q, grid, j, small.tuple_cap)[0] for j in range(grid.layout.count)]
        assert compose_blocks(cands, n, grid.layout.size).value == exhaustive_composition(cands, n, grid.layout.size)


def test_exhaustive_budget():
    with pytest.raises(BudgetExceeded):
        exhaustive_composition([[]] * 4, 4, 1)


# postprocessing ------------------------------------------------------------------------------------


def test_postprocess_examples():
    assert postprocess((DUMMY, 3, DUMMY, 1), 3) == perm(3, 2, 1)
    assert postprocess((2, 3, 1), 3) == perm(2, 3, 1)
    assert postprocess((DUMMY,) * 4, 4) == Permutation.identity(4)


@pytest.mark.parametrize("bad", [(1, 2), (1, 1, 2), (1, 2, 3, 4), (5, DUMMY, DUMMY)])
def test_postprocess_invariants(bad):
    with pytest.raises(InvariantViolation):
        postprocess(bad, 3)


# full pipeline -----------------------------------------------------------------------------------


def test_five_copies(rng):
    for n in (1, 2, 7, 16, 23):
        p = random_permutation(rng, n)
        assert scalable_median_reconstruct(Instance((p,) * 5)).permutation == p


def test_four_copies_and_one_outlier(rng):
    for _ in range(15):
        n = int(rng.integers(2, 13))
        p = random_permutation(rng, n)
        Q = Instance((p,) * 4 + (random_permutation(rng, n),))
        assert scalable_median_reconstruct(Q, PARAMS).permutation == p


def test_cost_bound_against_exact_median(rng):
    for t in range(60):
        n = int(rng.integers(1, 9))
        Q = uniform_instance(n, 5, t)
        y_star, opt = exact_median(Q, Metric.ULAM)
        out = scalable_median_reconstruct(Q, PARAMS).permutation
        lhs = 5 * cost(out, Q, Metric.ULAM)
        assert lhs <= 1.01 * 5 * opt + 70 * total_slack(Q, y_star, Metric.ULAM).total + 1e-9


@given(st.integers(1, 14).flatmap(lambda n: st.tuples(*[permutations(n)] * 5)))
def test_output_is_permutation_and_deterministic(ps):
    Q = Instance(ps)
    a = scalable_median_reconstruct(Q, ReconstructParams(tuple_cap=32))
    b = scalable_median_reconstruct(Q, ReconstructParams(tuple_cap=32))
    assert sorted(a.permutation.forward) == list(range(1, Q.n + 1))
    assert a.permutation == b.permutation and a.trace.to_json() == b.trace.to_json()
    real = [e for blk in a.intermediate for e in blk if e != DUMMY]
    assert len(real) == len(set(real))


def test_trace_reports_truncation():
    Q = uniform_instance(16, 5, 3)
    res = scalable_median_reconstruct(Q, ReconstructParams(tuple_cap=5))
    assert res.trace.tuple_counts == [5] * 4 and all(res.trace.truncated)
    data = res.trace.to_json()
    assert set(data) == {"tupleCounts", "truncated", "blockED", "chosen"}
    tiny = scalable_median_reconstruct(uniform_instance(2, 5, 3), ReconstructParams(tuple_cap=10 ** 6))
    assert not any(tiny.trace.truncated)


def test_needs_five_members():
    with pytest.raises(InvalidInputError):
        scalable_median_reconstruct(uniform_instance(5, 4, 0))
