import math
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from wiener_chaos.multiindex import MultiIndex, ZERO, count_indices, enumerate_indices

small = st.dictionaries(st.integers(1, 6), st.integers(1, 4), max_size=4).map(MultiIndex)


def test_basic_properties():
    a = MultiIndex.from_dense([2, 0, 1])
    assert a.order == 3
    assert a.factorial() == 2
    assert a.support == (1, 3)
    assert a.max_index == 3
    assert a.characteristic_set() == (1, 1, 3)
    assert a[2] == 0 and a[1] == 2
    assert a.to_string() == "1,1,3"
    assert ZERO.to_string() == "" and ZERO.order == 0 and ZERO.factorial() == 1


def test_parse_roundtrip_and_unit():
    assert MultiIndex.parse("1,1,3") == MultiIndex.from_dense([2, 0, 1])
    assert MultiIndex.parse("") == ZERO
    assert MultiIndex.unit(4).items() == ((4, 1),)


def test_weight_log_matches_direct_formula():
    a = MultiIndex.from_dense([1, 2])
    p, q = -1.5, 0.7
    direct = 2 ** (p * 3) * (1 ** (2 * q)) * (2 ** (2 * q * 2)) / math.factorial(3)
    assert a.weight_log(p, q) == pytest.approx(math.log(direct), rel=1e-14)


def test_subtraction_refuses_negative_entries():
    with pytest.raises(ValueError):
        MultiIndex.unit(1) - MultiIndex.unit(2)


@pytest.mark.parametrize("N,K", [(0, 1), (1, 5), (3, 4), (6, 3), (4, 7)])
def test_enumeration_count_and_uniqueness(N, K):
    idx = list(enumerate_indices(N, K))
    assert len(idx) == count_indices(N, K) == math.comb(N + K, K)
    assert len(set(idx)) == len(idx)
    assert all(a.order <= N and a.max_index <= K for a in idx)
    # grouped by level
    assert [a.order for a in idx] == sorted(a.order for a in idx)


def test_enumeration_rejects_bad_truncation():
    with pytest.raises(ValueError):
        list(enumerate_indices(-1, 3))
    with pytest.raises(ValueError):
        list(enumerate_indices(2, 0))


@given(small, small)
def test_add_sub_roundtrip(a, b):
    assert (a + b) - b == a
    assert (a + b).order == a.order + b.order


@given(small)
def test_factorial_and_log_factorial_agree(a):
    assert a.log_factorial() == pytest.approx(math.log(a.factorial()), abs=1e-12)
    assert Counter(a.characteristic_set()) == Counter(dict(a.items()))
    assert MultiIndex.from_characteristic(a.characteristic_set()) == a


@given(small, small)
def test_hash_consistent_with_equality(a, b):
    if a == b:
        assert hash(a) == hash(b)
    assert (a < b) or (b < a) or a == b
