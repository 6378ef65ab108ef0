import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from sfe.core import (
    InfeasibleSetError,
    SetFunctionOracle,
    SizeLimitError,
    Subset,
    SupportedDistribution,
    cardinality_oracle,
    modular_oracle,
    random_table_oracle,
    table_oracle,
)
from sfe.objectives import Graph, cut_function
from sfe.scalar import (
    LOVASZ,
    MULTILINEAR,
    SIMPLEX_SINGLETON,
    SINGLETON,
    ExtensionKind,
    SortPermutation,
    Variant,
    bounded,
    bounded_support,
    decode,
    evaluate,
    lovasz_gradient,
    lovasz_support,
    multilinear_gradient,
    multilinear_support,
    simplex_singleton_support,
    singleton_support,
    support,
)
from sfe.verify import check_lp_feasible


def S(*items, n):
    return Subset.of(items, n).bits


def assert_dist(d, expected, tol=1e-12):
    got = d.as_dict()
    for m, w in expected.items():
        assert abs(got.get(m, 0.0) - w) <= tol, (m, got.get(m), w)
    for m, w in got.items():
        assert m in expected or abs(w) <= tol, (m, w)


unit = st.floats(0.0, 1.0, allow_nan=False)


# ---- kinds

def test_kind_parse_and_domains():
    assert ExtensionKind.parse("bounded:3") == bounded(3)
    assert ExtensionKind.parse("lovasz") is not None
    assert str(bounded(4)) == "bounded:4"
    assert bounded(2).domain == "simplex" and SIMPLEX_SINGLETON.domain == "simplex"
    assert LOVASZ.domain == "box" and MULTILINEAR.domain == "box"
    assert not SINGLETON.lp_feasible and LOVASZ.lp_feasible
    with pytest.raises(ValueError):
        ExtensionKind.parse("bounded")
    with pytest.raises(ValueError):
        ExtensionKind(Variant.BOUNDED, 0)
    with pytest.raises(ValueError):
        ExtensionKind.parse("nope")


def test_sort_permutation_tie_break():
    perm = SortPermutation.of([0.5, 0.9, 0.5, 0.1])
    assert perm.order == (1, 0, 2, 3)
    assert perm.sorted_values([0.5, 0.9, 0.5, 0.1]) == [0.9, 0.5, 0.5, 0.1, 0.0]


@given(arrays(float, st.integers(1, 9), elements=unit))
def test_sort_permutation_non_increasing(x):
    s = SortPermutation.of(x).sorted_values(x)
    assert all(a >= b for a, b in zip(s, s[1:]))


# ---- lovasz

def test_lovasz_support_examples():
    assert_dist(lovasz_support([0.7, 0.5, 0.2]),
                {S(0, n=3): 0.2, S(0, 1, n=3): 0.3, S(0, 1, 2, n=3): 0.2, 0: 0.3})
    d = lovasz_support([1.0, 1.0, 0.0])
    assert d.as_dict() == {S(0, 1, n=3): 1.0}
    assert lovasz_support(np.zeros(4)).as_dict() == {0: 1.0}


def test_lovasz_support_domain_error():
    with pytest.raises(ValueError):
        lovasz_support([1.2, 0.0])
    with pytest.raises(ValueError):
        lovasz_support([-0.1, 0.0])


def _lovasz_threshold_integral(f, x):
    # f_L(x) = int_0^1 f({i : x_i >= t}) dt, piecewise constant between breakpoints
    pts = sorted(set([0.0, 1.0, *x.tolist()]))
    total = 0.0
    for lo, hi in zip(pts, pts[1:]):
        t = 0.5 * (lo + hi)
        bits = sum(1 << i for i, xi in enumerate(x) if xi >= t)
        total += (hi - lo) * f(bits)
    return total


def test_lovasz_matches_threshold_integral(rng):
    for _ in range(50):
        n = int(rng.integers(1, 9))
        f = random_table_oracle(n, rng)
        x = rng.random(n)
        assert abs(evaluate(LOVASZ, f, x) - _lovasz_threshold_integral(f, x)) <= 1e-12


def test_evaluate_examples():
    assert abs(evaluate(LOVASZ, cardinality_oracle(3), [0.7, 0.5, 0.2]) - 1.4) <= 1e-12
    path = cut_function(Graph.from_edges(3, [(0, 1), (1, 2)]))
    assert abs(evaluate(LOVASZ, path, [1.0, 0.5, 0.0]) - 1.0) <= 1e-12


def test_evaluate_skips_zero_weight_sets():
    f = SetFunctionOracle(lambda s: math.inf if len(s) == 1 else -1.0, 3)
    # x = 1_{0,1,2}: only the full set carries weight
    assert evaluate(LOVASZ, f, [1.0, 1.0, 1.0]) == -1.0
    assert f.eval_count == 1
    with pytest.raises(InfeasibleSetError):
        evaluate(LOVASZ, f, [0.9, 0.5, 0.1])


@pytest.mark.parametrize("kind", [LOVASZ, MULTILINEAR, bounded(3), SINGLETON, SIMPLEX_SINGLETON])
def test_extension_at_corners(kind, rng):
    n = 6
    for _ in range(5):
        f = random_table_oracle(n, rng)
        for bits in range(1 << n):
            if kind.applies_to(bits):
                x = Subset(bits, n).indicator()
                assert abs(evaluate(kind, f, x) - f(bits)) <= 1e-12


# ---- feasibility

@pytest.mark.parametrize("kind", [LOVASZ, MULTILINEAR, bounded(2), bounded(4), SIMPLEX_SINGLETON])
def test_lp_feasibility_random(kind, rng):
    n = 8
    for _ in range(200):
        x = rng.dirichlet(np.ones(n + 1))[:n] if kind.domain == "simplex" else rng.random(n)
        d = support(kind, x)
        r = check_lp_feasible(d, x, 1e-10)
        assert r.passed, r
        assert r.min_weight >= -1e-12


@given(arrays(float, 7, elements=unit))
def test_lovasz_feasible_property(x):
    assert check_lp_feasible(lovasz_support(x), x, 1e-10).passed


# ---- bounded

def test_bounded_example():
    d = bounded_support([0.4, 0.3, 0.2, 0.1], 2)
    assert_dist(d, {S(0, n=4): 0.2, S(0, 1, n=4): 0.2, S(1, 2, n=4): 0.1, S(2, 3, n=4): 0.1, 0: 0.4})


def test_bounded_k_equals_n_is_lovasz(rng):
    for _ in range(200):
        n = int(rng.integers(1, 17))
        x = rng.random(n)
        a = support(bounded(n), x, check=False)
        b = lovasz_support(x)
        assert a.masks == b.masks
        assert np.max(np.abs(a.weights - b.weights)) <= 1e-12


def test_bounded_corner_is_point_mass():
    d = bounded_support([0.0, 1.0, 1.0, 0.0], 2)
    assert d.as_dict() == {S(1, 2, n=4): 1.0}


def test_bounded_errors():
    with pytest.raises(ValueError):
        bounded_support([0.6, 0.6, 0.6], 1)
    with pytest.raises(ValueError):
        bounded_support([0.1, 0.1], 3)


def test_bounded_sets_have_at_most_k_elements(rng):
    for _ in range(100):
        n = int(rng.integers(2, 12))
        k = int(rng.integers(1, n + 1))
        d = support(bounded(k), rng.dirichlet(np.ones(n + 1))[:n])
        assert all(m.bit_count() <= k for m in d.masks)


# ---- singletons

def test_singleton_examples():
    d = singleton_support([0.7, 0.5, 0.2])
    assert_dist(d, {S(0, n=3): 0.2, S(1, n=3): 0.3, S(2, n=3): 0.2, 0: 0.3})
    assert not d.lp_feasible
    assert singleton_support([1.0, 0.0, 0.0]).as_dict() == {S(0, n=3): 1.0}
    d = singleton_support([0.5, 0.5])
    assert d.weight_of(S(0, n=2)) == 0.0
    assert_dist(d, {S(1, n=2): 0.5, 0: 0.5})


def test_singleton_is_lp_infeasible():
    r = check_lp_feasible(singleton_support([0.7, 0.5, 0.2]), [0.7, 0.5, 0.2])
    assert not r.passed
    assert abs(r.marginal_residual - 0.5) <= 1e-12


def test_simplex_singleton_examples():
    assert_dist(simplex_singleton_support([0.5, 0.3, 0.2]), {1: 0.5, 2: 0.3, 4: 0.2})
    assert simplex_singleton_support([0.0, 1.0, 0.0]).as_dict() == {2: 1.0}
    d = simplex_singleton_support(np.full(4, 0.25))
    assert sorted(d.weights.tolist()) == [0.25] * 4
    with pytest.raises(ValueError):
        simplex_singleton_support([0.7, 0.7])


# ---- multilinear

def test_multilinear_examples():
    d = multilinear_support([0.5, 0.5])
    assert d.as_dict() == {0: 0.25, 1: 0.25, 2: 0.25, 3: 0.25}
    assert multilinear_support([1.0, 0.0, 1.0]).as_dict() == {5: 1.0}
    assert_dist(multilinear_support([0.3]), {0: 0.7, 1: 0.3})
    with pytest.raises(SizeLimitError):
        multilinear_support(np.full(21, 0.5))


def test_multilinear_matches_enumeration(rng):
    for _ in range(20):
        n = int(rng.integers(1, 7))
        x = rng.random(n)
        f = random_table_oracle(n, rng)
        ref = 0.0
        for bits in itertools.product([0, 1], repeat=n):
            p = math.prod(x[i] if b else 1 - x[i] for i, b in enumerate(bits))
            ref += p * f(sum(b << i for i, b in enumerate(bits)))
        assert abs(evaluate(MULTILINEAR, f, x) - ref) <= 1e-12


# ---- gradients

def test_lovasz_gradient_examples(rng):
    w = rng.standard_normal(5)
    assert np.allclose(lovasz_gradient(modular_oracle(w), rng.random(5)), w, atol=1e-12)
    assert lovasz_gradient(cardinality_oracle(2), [0.8, 0.3]).tolist() == [1.0, 1.0]


def _fd(fn, x, h=1e-5):
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


def _tie_free(x):
    s = np.sort(np.concatenate([x, [0.0, 1.0]]))
    return np.all(np.diff(s) > 1e-3)


def test_lovasz_gradient_finite_differences(rng):
    checked = 0
    while checked < 50:
        n = 6
        x = rng.random(n)
        if not _tie_free(x):
            continue
        f = random_table_oracle(n, rng)
        g = lovasz_gradient(f, x)
        fd = _fd(lambda y: evaluate(LOVASZ, f, y, check=False), x)
        assert np.linalg.norm(g - fd) <= 1e-4 * np.linalg.norm(fd)
        checked += 1


def test_multilinear_gradient_examples(rng):
    x = rng.random(4)
    assert np.allclose(multilinear_gradient(cardinality_oracle(4), x), 1.0, atol=1e-12)
    and_f = table_oracle([0, 0, 0, 1], 2)
    assert np.allclose(multilinear_gradient(and_f, [0.5, 0.5]), [0.5, 0.5], atol=1e-12)
    for _ in range(20):
        f = random_table_oracle(5, rng)
        x = rng.random(5)
        fd = _fd(lambda y: evaluate(MULTILINEAR, f, y, check=False), x)
        assert np.max(np.abs(multilinear_gradient(f, x) - fd)) <= 1e-6 * max(1.0, np.max(np.abs(fd)))


# ---- decode

def test_decode_examples():
    f = SetFunctionOracle(lambda s: -float(len(s)), 3)
    d = SupportedDistribution(3, (1, 3), np.array([0.2, 0.3]))
    s, v = decode(d, f)
    assert s == Subset(3, 3) and v == -2.0
    s, v = decode(SupportedDistribution(3, (5,), np.array([1.0])), f)
    assert s.bits == 5
    with pytest.raises(ValueError):
        decode(SupportedDistribution(3, (1, 3), np.array([1e-12, 1e-10])), f)


def test_decode_tie_break_and_predicate():
    f = table_oracle([0, -1, -1, -1, -1, 0, 0, 0], 3)
    d = SupportedDistribution(3, (4, 2, 3), np.array([0.3, 0.3, 0.4]))
    s, _ = decode(d, f)
    assert s.bits == 2  # -1 on {1}, {2} and {0,1}: smallest size, then mask
    s, _ = decode(d, f, feasible=lambda m: m != 2)
    assert s.bits == 4


# ---- invariants

def test_no_bad_minima_lovasz(rng):
    n = 6
    f = random_table_oracle(n, rng)
    lo = float(f.table().min())
    for x in rng.random((2000, n)):
        assert evaluate(LOVASZ, f, x) >= lo - 1e-10


def test_singleton_no_bad_minima_variant(rng):
    n = 6
    f = random_table_oracle(n, rng)
    single = min(f(1 << i) for i in range(n))
    floor = min(0.0, single)
    for x in rng.random((2000, n)):
        assert evaluate(SINGLETON, f, x) >= floor - 1e-10
    j = min(range(n), key=lambda i: f(1 << i))
    assert evaluate(SINGLETON, f, np.eye(n)[j]) == single


def test_lovasz_lipschitz(rng):
    n = 7
    for _ in range(30):
        f = random_table_oracle(n, rng)
        bound = 2 * n * float(np.max(np.abs(f.table())))
        for _ in range(20):
            x, y = rng.random(n), rng.random(n)
            assert abs(evaluate(LOVASZ, f, x) - evaluate(LOVASZ, f, y)) <= bound * np.max(np.abs(x - y)) + 1e-12


def test_lovasz_of_cut_is_total_variation(rng):
    for _ in range(30):
        n = int(rng.integers(2, 65))
        g = Graph.random(n, float(rng.random()), rng)
        x = rng.random(n)
        tv = math.fsum(abs(x[i] - x[j]) for i, j in g.edges())
        assert abs(evaluate(LOVASZ, cut_function(g), x) - tv) <= 1e-12 * max(1.0, tv)


@pytest.mark.parametrize("kind", [LOVASZ, MULTILINEAR, bounded(3), SINGLETON, SIMPLEX_SINGLETON])
def test_relabeling_invariance(kind, rng):
    n = 6
    for _ in range(20):
        table = rng.standard_normal(1 << n)
        table[0] = 0.0
        f = table_oracle(table, n)
        pi = rng.permutation(n)
        # g(S) = f(pi(S)) and y = x o pi, so g_ext(y) = f_ext(x)
        relabel = [sum(1 << int(pi[i]) for i in range(n) if (m >> i) & 1) for m in range(1 << n)]
        g = table_oracle(table[relabel], n)
        x = rng.dirichlet(np.ones(n + 1))[:n] if kind.domain == "simplex" else rng.random(n)
        y = x[pi]
        if kind is MULTILINEAR:
            # product weights are multiplied in a different order after relabeling
            assert evaluate(kind, g, y) == pytest.approx(evaluate(kind, f, x), abs=1e-14)
        else:
            assert evaluate(kind, g, y) == evaluate(kind, f, x)


def test_top_element_of_64_ground_set():
    g = Graph.from_edges(64, [(62, 63), (0, 63), (1, 2)])
    x = np.zeros(64)
    x[63], x[0] = 1.0, 0.25
    assert evaluate(LOVASZ, cut_function(g), x) == pytest.approx(1.75, abs=1e-15)
