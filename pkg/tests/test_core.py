import math
import threading

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sfe.core import (
    InfeasibleSetError,
    PairDistribution,
    SetFunctionOracle,
    SizeLimitError,
    Subset,
    SupportedDistribution,
    cardinality_oracle,
    check_symmetric,
    indicator,
    indicator_matrix,
    intersect,
    oracle_eval,
    table_oracle,
)


def test_indicator_examples():
    assert indicator(Subset.of([0, 2], 3)).tolist() == [1.0, 0.0, 1.0]
    assert indicator(Subset.empty(4)).tolist() == [0.0] * 4
    assert indicator(Subset.full(2)).tolist() == [1.0, 1.0]


def test_intersect_examples():
    a, b = Subset.of([0, 1], 3), Subset.of([1, 2], 3)
    assert intersect(a, b) == Subset.of([1], 3)
    assert intersect(a, a) == a
    assert intersect(a, Subset.empty(3)) == Subset.empty(3)


def test_intersect_mismatched_n():
    with pytest.raises(ValueError):
        intersect(Subset.of([0], 2), Subset.of([0], 3))


def test_subset_validation():
    with pytest.raises(ValueError):
        Subset(0b100, 2)
    with pytest.raises(SizeLimitError):
        Subset(0, 65)
    with pytest.raises(ValueError):
        Subset.of([3], 3)
    s = Subset.of([63], 64)
    assert len(s) == 1 and 63 in s


@given(st.integers(0, 255), st.integers(0, 255))
def test_bit_identities(a, b):
    s, t = Subset(a, 8), Subset(b, 8)
    both = indicator(s) * indicator(t)
    assert indicator(s & t).tolist() == both.tolist()
    assert len(s & t) == int(both.sum())
    assert len(s | t) == len(s) + len(t) - len(s & t)
    assert sorted(s) == [i for i in range(8) if (a >> i) & 1]


def test_indicator_matrix_rows():
    m = indicator_matrix(4)
    for bits in range(16):
        assert m[bits].tolist() == indicator(Subset(bits, 4)).tolist()


def test_oracle_eval_examples():
    f = cardinality_oracle(3)
    assert oracle_eval(f, Subset.of([0, 1], 3)) == 2
    assert f.eval_count == 1
    oracle_eval(f, Subset.of([0, 1], 3))
    assert f.eval_count == 1
    assert oracle_eval(f, Subset.empty(3)) == 0


def test_empty_set_forced_to_zero():
    calls = []

    def ev(s):
        calls.append(s.bits)
        return 5.0

    f = SetFunctionOracle(ev, 3)
    assert f(0) == 0.0
    assert calls == []


def test_oracle_rejects_nan_and_flags_infinite():
    f = SetFunctionOracle(lambda s: math.nan, 2)
    with pytest.raises(ValueError):
        f(1)
    g = SetFunctionOracle(lambda s: math.inf if len(s) == 2 else 1.0, 2)
    assert g.is_feasible(1)
    assert not g.is_feasible(3)
    with pytest.raises(InfeasibleSetError):
        g(3)
    with pytest.raises(InfeasibleSetError):
        g.values([1, 3])
    h = SetFunctionOracle(lambda s: -math.inf, 2)
    with pytest.raises(ValueError):
        h(1)


def test_oracle_values_matches_scalar_calls(rng):
    table = rng.standard_normal(1 << 5)
    f = table_oracle(table, 5)
    masks = rng.integers(0, 32, size=40)
    vals = f.values(masks)
    assert [f(int(m)) for m in masks] == vals.tolist()
    assert f.eval_count == len(set(masks.tolist()))


def test_oracle_sparse_cache_for_large_n():
    f = cardinality_oracle(40)
    assert f.values([0, 3, 1 << 39]).tolist() == [0.0, 2.0, 1.0]
    assert f.eval_count == 3


def test_oracle_threaded_determinism():
    counter = []

    def ev(s):
        counter.append(s.bits)
        return float(s.bits % 7) - 3.0

    f = SetFunctionOracle(ev, 10)
    results = [None] * 8

    def work(i):
        results[i] = [f(m) for m in range(1 << 10)]

    threads = [threading.Thread(target=work, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(r == results[0] for r in results)
    assert len(counter) == (1 << 10) - 1  # each non-empty set evaluated once
    assert f.eval_count == 1 << 10


def test_supported_distribution_rejects_duplicates():
    with pytest.raises(ValueError):
        SupportedDistribution(2, (1, 1), np.array([0.5, 0.5]))


def test_supported_distribution_queries():
    d = SupportedDistribution(3, (0, 1, 3), np.array([0.25, 0.25, 0.5]))
    assert d.mass() == 1.0
    assert d.marginals().tolist() == [0.75, 0.5, 0.0]
    assert d.weight_of(Subset(3, 3)) == 0.5
    assert d.weight_of(7) == 0.0
    assert len(d.pruned(0.3)) == 1


def test_pair_distribution_lifted_matrix():
    p = PairDistribution(2, (1, 3), (2, 3), np.array([1.0, 2.0]))
    m = p.lifted_matrix()
    expected = 0.5 * np.array([[0, 1], [1, 0]]) + 2.0 * np.ones((2, 2))
    assert np.array_equal(m, expected)
    assert p.weight_of(1, 2) == 1.0


def test_check_symmetric():
    with pytest.raises(ValueError):
        check_symmetric(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        check_symmetric(np.ones((2, 3)))
    check_symmetric(np.eye(3))
