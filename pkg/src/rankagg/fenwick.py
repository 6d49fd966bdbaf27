"""Binary indexed trees used by the distance kernels."""

from __future__ import annotations


class FenwickTree:
    """Prefix sums over ``size`` slots indexed from 0."""

    def __init__(self, size: int) -> None:
        self.size = size
        self._tree = [0.0] * (size + 1)

    def add(self, index: int, value: float) -> None:
        i = index + 1
        while i <= self.size:
            self._tree[i] += value
            i += i & -i

    def prefix(self, index: int) -> float:
        """Sum of slots ``0..index`` inclusive; ``index = -1`` gives 0."""
        total = 0.0
        i = index + 1
        while i > 0:
            total += self._tree[i]
            i -= i & -i
        return total


class FenwickCounter:
    """Integer-valued variant, kept separate so unweighted counts stay exact ints."""

    def __init__(self, size: int) -> None:
        self.size = size
        self._tree = [0] * (size + 1)

    def add(self, index: int, value: int = 1) -> None:
        i = index + 1
        while i <= self.size:
            self._tree[i] += value
            i += i & -i

    def prefix(self, index: int) -> int:
        total = 0
        i = index + 1
        while i > 0:
            total += self._tree[i]
            i -= i & -i
        return total


class FenwickMax:
    """Prefix maxima of ``(value, tag)`` pairs; values only ever increase at a slot."""

    def __init__(self, size: int) -> None:
        self.size = size
        self._tree = [(0.0, -1)] * (size + 1)

    def update(self, index: int, value: float, tag: int = -1) -> None:
        i = index + 1
        while i <= self.size:
            if self._tree[i][0] < value:
                self._tree[i] = (value, tag)
            i += i & -i

    def prefix_max(self, index: int) -> float:
        return self.prefix_argmax(index)[0]

    def prefix_argmax(self, index: int) -> tuple:
        """Largest value among slots ``0..index`` and the tag stored with it (-1 if none)."""
        best = (0.0, -1)
        i = index + 1
        while i > 0:
            if self._tree[i][0] > best[0]:
                best = self._tree[i]
            i -= i & -i
        return best
