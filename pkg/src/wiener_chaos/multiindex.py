"""Finitely supported multi-indices alpha = (alpha_1, alpha_2, ...).

Indices are 1-based (basis function m_1 is the constant).  A multi-index is
stored sparsely as a sorted tuple of ``(k, alpha_k)`` pairs with
``alpha_k >= 1``; the zero index has empty support.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from typing import Iterable, Iterator, Mapping

_LN2 = math.log(2.0)


class MultiIndex:
    __slots__ = ("_items", "_hash")

    def __init__(self, entries: Mapping[int, int] | None = None):
        items = []
        for k, a in (entries or {}).items():
            k, a = int(k), int(a)
            if k < 1:
                raise ValueError(f"basis index must be >= 1, got {k}")
            if a < 0:
                raise ValueError(f"multiplicity must be >= 0, got {a} at k={k}")
            if a:
                items.append((k, a))
        self._items = tuple(sorted(items))
        self._hash = hash(self._items)

    @classmethod
    def unit(cls, k: int) -> "MultiIndex":
        """The index epsilon_k."""
        return cls({k: 1})

    @classmethod
    def from_dense(cls, seq: Iterable[int]) -> "MultiIndex":
        """Build from ``(alpha_1, alpha_2, ...)``."""
        return cls({k: a for k, a in enumerate(seq, start=1)})

    @classmethod
    def from_characteristic(cls, chars: Iterable[int]) -> "MultiIndex":
        return cls(Counter(int(k) for k in chars))

    @classmethod
    def parse(cls, text: str) -> "MultiIndex":
        """Inverse of :meth:`to_string`."""
        text = text.strip()
        if not text:
            return cls()
        return cls.from_characteristic(int(s) for s in text.split(","))

    def items(self) -> tuple[tuple[int, int], ...]:
        return self._items

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(k for k, _ in self._items)

    @property
    def max_index(self) -> int:
        return self._items[-1][0] if self._items else 0

    @property
    def order(self) -> int:
        """|alpha| = sum_k alpha_k."""
        return sum(a for _, a in self._items)

    def factorial(self) -> int:
        """alpha! as an exact integer."""
        return math.prod(math.factorial(a) for _, a in self._items)

    def log_factorial(self) -> float:
        """ln(alpha!)."""
        if self.order <= 20:
            return math.log(self.factorial())
        return sum(math.lgamma(a + 1) for _, a in self._items)

    def characteristic_set(self) -> tuple[int, ...]:
        """Non-decreasing i_1 <= ... <= i_n in which k appears alpha_k times."""
        return tuple(k for k, a in self._items for _ in range(a))

    def weight_log(self, p: float, q: float) -> float:
        """ln(2^{p|alpha|} prod_k k^{2q alpha_k} / |alpha|!)."""
        n = self.order
        log_kq = sum(a * math.log(k) for k, a in self._items)
        return p * n * _LN2 + 2.0 * q * log_kq - math.lgamma(n + 1)

    def to_string(self) -> str:
        """Characteristic set as a comma separated list ('' for the zero index)."""
        return ",".join(str(k) for k in self.characteristic_set())

    def __getitem__(self, k: int) -> int:
        for kk, a in self._items:
            if kk == k:
                return a
        return 0

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        d = dict(self._items)
        for k, a in other._items:
            d[k] = d.get(k, 0) + a
        return MultiIndex(d)

    def __sub__(self, other: "MultiIndex") -> "MultiIndex":
        d = dict(self._items)
        for k, a in other._items:
            left = d.get(k, 0) - a
            if left < 0:
                raise ValueError(f"{self!r} - {other!r} has a negative entry at k={k}")
            d[k] = left
        return MultiIndex(d)

    def __eq__(self, other) -> bool:
        return isinstance(other, MultiIndex) and self._items == other._items

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "MultiIndex") -> bool:
        return (self.order, self.characteristic_set()) < (other.order, other.characteristic_set())

    def __repr__(self) -> str:
        if not self._items:
            return "MultiIndex(0)"
        return "MultiIndex(" + ", ".join(f"{k}:{a}" for k, a in self._items) + ")"


ZERO = MultiIndex()


def count_indices(N: int, K: int) -> int:
    """Number of alpha with |alpha| <= N and support in {1..K}."""
    return math.comb(N + K, K)


def enumerate_indices(N: int, K: int) -> Iterator[MultiIndex]:
    """All alpha with |alpha| <= N, support in {1..K}.

    Grouped by increasing order; lexicographic on the characteristic set
    within a level.
    """
    if N < 0 or K < 1:
        raise ValueError(f"need N >= 0 and K >= 1, got N={N}, K={K}")
    for n in range(N + 1):
        for chars in itertools.combinations_with_replacement(range(1, K + 1), n):
            yield MultiIndex.from_characteristic(chars)
