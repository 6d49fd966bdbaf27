"""Shared hypothesis strategies."""

from hypothesis import strategies as st

from rankagg.perm import Permutation


def permutations(n: int):
    return st.permutations(list(range(1, n + 1))).map(lambda xs: Permutation(tuple(xs)))


@st.composite
def perm_pair(draw, max_n: int = 40):
    n = draw(st.integers(1, max_n))
    return draw(permutations(n)), draw(permutations(n))


@st.composite
def perm_triple(draw, max_n: int = 20):
    n = draw(st.integers(1, max_n))
    return draw(permutations(n)), draw(permutations(n)), draw(permutations(n))


def weights(n: int, integral: bool = True):
    if integral:
        return st.lists(st.integers(1, 9).map(float), min_size=n, max_size=n)
    return st.lists(st.floats(0.1, 5.0), min_size=n, max_size=n)
