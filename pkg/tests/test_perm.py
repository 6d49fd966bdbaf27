import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import perm
from strategies import perm_pair, perm_triple, permutations, weights
from rankagg.oracles import naive_footrule, naive_hamming, naive_kendall, naive_ulam_moves
from rankagg.perm import (Instance, InstanceFormatError, InvalidInputError, Metric, Permutation, cost, distance,
                          footrule, hamming, kendall, ulam)

# examples ---------------------------------------------------------------------


def test_hamming_examples():
    assert hamming(perm(1, 2, 3), perm(1, 2, 3)) == 0
    assert hamming(perm(1, 2, 3), perm(2, 1, 3)) == 2
    assert hamming(perm(1, 2, 3), perm(2, 1, 3), (1, 2, 3)) == 3


def test_footrule_examples():
    assert footrule(perm(1, 2, 3), perm(1, 2, 3)) == 0
    assert footrule(perm(1, 2, 3), perm(3, 2, 1)) == 4


@pytest.mark.parametrize("n", range(2, 9))
def test_footrule_identity_vs_reverse(n):
    p, q = Permutation.identity(n), Permutation.reverse(n)
    assert footrule(p, q) == naive_footrule(p.forward, q.forward) == n * n // 2


def test_kendall_examples():
    assert kendall(perm(1, 2, 3), perm(1, 2, 3)) == 0
    assert kendall(perm(1, 2, 3), perm(3, 2, 1)) == 3
    assert kendall(perm(1, 2), perm(2, 1), (2, 4)) == 3


def test_ulam_examples():
    assert ulam(perm(1, 2, 3), perm(1, 2, 3)) == (0, 0)
    assert ulam(perm(1, 2, 3, 4), perm(2, 3, 4, 1)) == (1, 2)
    assert ulam(perm(1, 2, 3), perm(3, 1, 2), (5, 1, 1)) == (1, 2)


def test_cost_examples():
    x = perm(1, 2, 3)
    assert cost(x, Instance((x,)), Metric.KENDALL) == 0
    assert cost(x, Instance((perm(1, 2, 3), perm(3, 2, 1))), Metric.KENDALL) == 1.5
    P = Instance((perm(2, 1, 3), perm(2, 1, 3)), (1.0, 2.0, 3.0))
    for metric in Metric:
        assert cost(perm(2, 1, 3), P, metric) == 0


def test_reverse_kendall_is_all_pairs():
    for n in range(1, 12):
        assert kendall(Permutation.identity(n), Permutation.reverse(n)) == math.comb(n, 2)


# errors -------------------------------------------------------------------------


@pytest.mark.parametrize("fn", [hamming, footrule, kendall, ulam])
def test_dimension_mismatch(fn):
    with pytest.raises(InvalidInputError):
        fn(perm(1, 2), perm(1, 2, 3))


@pytest.mark.parametrize("bad", [(1, 1), (0, 1), (1, 3), ()])
def test_invalid_permutation(bad):
    with pytest.raises(InvalidInputError):
        Permutation(bad)


def test_weighted_metric_needs_weights():
    with pytest.raises(InvalidInputError):
        cost(perm(1, 2), Instance((perm(1, 2),)), Metric.WEIGHTED_KENDALL)
    with pytest.raises(InvalidInputError):
        distance(Metric.WEIGHTED_ULAM, perm(1, 2), perm(2, 1))


def test_negative_or_short_weights_rejected():
    with pytest.raises(InvalidInputError):
        hamming(perm(1, 2), perm(2, 1), (1.0,))
    with pytest.raises(InvalidInputError):
        Instance((perm(1, 2),), (1.0, -1.0))


def test_metric_names():
    assert Metric.parse("Weighted_Kendall") is Metric.WEIGHTED_KENDALL
    assert Metric.WEIGHTED_ULAM.family == "ulam" and Metric.WEIGHTED_ULAM.weighted
    with pytest.raises(InvalidInputError):
        Metric.parse("cayley")


# instance files ---------------------------------------------------------------------


def test_instance_round_trip():
    P = Instance((perm(2, 1, 3), perm(3, 1, 2)), (0.5, 1.0, 2.25))
    assert Instance.parse(P.to_text()) == P
    Q = Instance((perm(1),))
    assert Instance.parse(Q.to_text()) == Q


@pytest.mark.parametrize("text, line, column", [
    ("", 1, 1),
    ("3\n", 1, 1),
    ("3 2\n1 2 3\n", 3, 1),
    ("3 2\n1 2 3\n1 2 x\n", 3, 5),
    ("3 1\n1 2 4\n", 2, 5),
    ("3 1\n1 1 2\n", 2, 3),
    ("3 1\n1 2\n", 2, 4),
    ("3 1\n1 2 3\nw 1 2\n", 3, 5),
    ("3 1\n1 2 3\nw 1 -2 3\n", 3, 5),
    ("3 1\n1 2 3\n3 2 1\n", 3, 1),
])
def test_parse_errors_name_line_and_column(text, line, column):
    with pytest.raises(InstanceFormatError) as err:
        Instance.parse(text)
    assert (err.value.line, err.value.column) == (line, column)
    assert f"line {line}, column {column}" in str(err.value)


# properties against the quadratic oracles ---------------------------------------------


@given(perm_pair())
def test_unweighted_kernels_match_oracles(pq):
    p, q = pq
    assert hamming(p, q) == naive_hamming(p.forward, q.forward)
    assert footrule(p, q) == naive_footrule(p.forward, q.forward)
    assert kendall(p, q) == naive_kendall(p.forward, q.forward)
    assert ulam(p, q).moves == naive_ulam_moves(p.forward, q.forward)


@given(perm_pair(), st.data())
def test_weighted_kernels_match_oracles(pq, data):
    p, q = pq
    w = data.draw(weights(p.n))
    assert hamming(p, q, w) == naive_hamming(p.forward, q.forward, w)
    assert kendall(p, q, w) == naive_kendall(p.forward, q.forward, w)
    assert ulam(p, q, w).moves == naive_ulam_moves(p.forward, q.forward, w)


@given(perm_pair(), st.data())
def test_real_weights_match_oracles_within_tolerance(pq, data):
    p, q = pq
    w = data.draw(weights(p.n, integral=False))
    assert kendall(p, q, w) == pytest.approx(naive_kendall(p.forward, q.forward, w), abs=1e-9)
    assert ulam(p, q, w).moves == pytest.approx(naive_ulam_moves(p.forward, q.forward, w), abs=1e-9)


@given(perm_pair())
def test_unit_weights_equal_unweighted(pq):
    p, q = pq
    ones = [1.0] * p.n
    assert hamming(p, q, ones) == hamming(p, q)
    assert kendall(p, q, ones) == kendall(p, q)
    assert ulam(p, q, ones).moves == ulam(p, q).moves


@given(perm_pair())
def test_indel_is_twice_moves(pq):
    p, q = pq
    d = ulam(p, q)
    assert d.indel == 2 * d.moves


@pytest.mark.parametrize("metric", list(Metric))
@given(pqr=perm_triple(), data=st.data())
def test_metric_axioms(metric, pqr, data):
    p, q, r = pqr
    w = data.draw(weights(p.n, integral=False)) if metric.weighted else None
    dpq = distance(metric, p, q, w)
    assert distance(metric, p, p, w) == 0
    assert (dpq > 0) == (p != q)
    assert dpq == pytest.approx(distance(metric, q, p, w), abs=1e-9)
    assert distance(metric, p, r, w) <= dpq + distance(metric, q, r, w) + 1e-9


@given(st.integers(1, 30).flatmap(permutations))
def test_inverse_is_consistent(p):
    for pos, e in enumerate(p.forward):
        assert p.position(e) == pos
