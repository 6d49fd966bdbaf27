from hypothesis import given
from hypothesis import strategies as st

from rankagg.rng import SeededPermutation, derive_seed, make_rng


def test_derive_seed_is_deterministic():
    assert derive_seed(7, "a", 1) == derive_seed(7, "a", 1)
    assert 0 <= derive_seed(7, "a") < 1 << 64


def test_labels_separate_streams():
    seeds = {derive_seed(7), derive_seed(7, "a"), derive_seed(7, "b"), derive_seed(7, "a", "b"),
             derive_seed(7, "ab"), derive_seed(8, "a")}
    assert len(seeds) == 6


def test_make_rng_replays():
    assert list(make_rng(3, "x").integers(1000, size=5)) == list(make_rng(3, "x").integers(1000, size=5))


@given(st.integers(0, (1 << 64) - 1), st.integers(1, 300))
def test_seeded_permutation_is_a_bijection(seed, size):
    f = SeededPermutation(seed, size)
    assert sorted(f(x) for x in range(size)) == list(range(size))


def test_seeded_permutation_depends_on_seed():
    a = [SeededPermutation(1, 50)(x) for x in range(50)]
    b = [SeededPermutation(2, 50)(x) for x in range(50)]
    assert a != b
