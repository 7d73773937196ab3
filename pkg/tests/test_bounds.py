import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from fqcomplete.bounds import (
    CappedAtOne,
    PeQuery,
    ThresholdQuery,
    binary_entropy,
    dmin_gv_estimate,
    inverse_binary_entropy,
    p0_unique_consistency,
    pe,
    pe_exact,
    pe_union_bound,
    pe_mc_oracle,
    solve_threshold,
    threshold_objective,
)


def gf2_rank(vectors):
    basis = []
    for v in vectors:
        for b in basis:
            v = min(v, v ^ b)
        if v:
            basis.append(v)
    return len(basis)


def pe_enumerated(eps, k, n):
    """Average over all k×n binary generators and all erasure patterns."""
    total = 0.0
    gens = list(itertools.product(range(1 << k), repeat=n))
    for pattern in itertools.product((0, 1), repeat=n):
        e = sum(pattern)
        weight = eps**e * (1 - eps) ** (n - e)
        if weight == 0:
            continue
        fails = sum(gf2_rank([c for c, er in zip(g, pattern) if not er]) < k for g in gens)
        total += weight * fails / len(gens)
    return total


@pytest.mark.parametrize("k,n", [(1, 1), (1, 3), (2, 2), (2, 4), (3, 4), (2, 5)])
@pytest.mark.parametrize("eps", [0.0, 0.3, 0.5, 0.9])
def test_pe_matches_enumeration(eps, k, n):
    assert pe(eps, k, n) == pytest.approx(pe_enumerated(eps, k, n), abs=1e-12)


def test_pe_examples():
    assert pe(1.0, 2, 5) == 1.0
    assert pe(0.0, 1, 3) == pytest.approx(0.125)
    assert pe(0.5, 1, 1) == pytest.approx(0.75)
    assert pe_exact(PeQuery(0.5, 1, 1)) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        PeQuery(1.5, 1, 2)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10), st.integers(1, 64))
def test_pe_closed_forms(k, n):
    assume(k <= n)
    assert pe(1.0, k, n) == 1.0
    prod = 1.0
    for i in range(n - k + 1, n + 1):
        prod *= 1 - 2.0**-i
    assert pe(0.0, k, n) == pytest.approx(1 - prod, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 10), st.integers(1, 64))
def test_pe_monotone(k, n):
    assume(k <= n)
    grid = [pe(e / 100, k, n) for e in range(101)]
    assert all(b >= a - 1e-12 for a, b in zip(grid, grid[1:]))
    if k < min(10, n):
        assert all(pe(e / 100, k + 1, n) >= pe(e / 100, k, n) - 1e-12 for e in range(0, 101, 5))


def test_pe_large_n_no_overflow():
    for eps in (0.3, 0.999, 0.9999):
        v = pe(eps, 5, 10_000)
        assert math.isfinite(v) and 0.0 <= v <= 1.0
    assert pe(0.9999, 5, 10_000) > pe(0.999, 5, 10_000)


def test_mc_oracle_examples():
    rng = np.random.default_rng(1)
    mean, se = pe_mc_oracle(PeQuery(1.0, 3, 7), 1000, rng)
    assert mean == 1.0 and se == 0.0
    mean, se = pe_mc_oracle(PeQuery(0.0, 1, 3), 1_000_000, rng)
    assert abs(mean - 0.125) <= 3 * se
    mean, se = pe_mc_oracle(PeQuery(0.5, 2, 10), 1_000_000, rng)
    assert abs(mean - pe(0.5, 2, 10)) <= 3 * se


@pytest.mark.parametrize("eps,k,n", [(0.4, 7, 12), (0.2, 8, 20)])
def test_mc_oracle_rank_fallback(eps, k, n):
    mean, se = pe_mc_oracle(PeQuery(eps, k, n), 200_000, np.random.default_rng(2))
    assert abs(mean - pe(eps, k, n)) <= 3 * se + 1e-9


def test_union_bound_examples():
    assert pe_union_bound(0.0, 0, 5) == 1.0
    assert pe_union_bound(1.0, 1, 1) == pytest.approx(2 * math.exp(-1))
    assert math.log(pe_union_bound(0.22, 5, 15.8)) == pytest.approx(-0.0104769, abs=5e-4)


def codewords(G):
    k, n = G.shape
    return [np.array(m) @ G % 2 for m in itertools.product((0, 1), repeat=k)][1:]


@pytest.mark.parametrize(
    "G",
    [
        np.array([[1, 1, 1, 0, 0, 0], [0, 0, 1, 1, 1, 0], [1, 0, 0, 0, 1, 1]]),  # arbitrary
        np.array([[1, 0, 0, 0, 1, 1, 0], [0, 1, 0, 0, 1, 0, 1], [0, 0, 1, 0, 0, 1, 1], [0, 0, 0, 1, 1, 1, 1]]),
        np.ones((1, 12), dtype=int),  # repetition
        np.hstack([np.eye(5, dtype=int), np.ones((5, 1), dtype=int)]),  # single parity check
    ],
)
def test_union_bound_upper_bounds_fixed_code(G):
    k, n = G.shape
    words = codewords(G)
    dmin = min(int(w.sum()) for w in words)
    for p in np.linspace(0.0, 1.0, 11):
        fail = 0.0
        for pattern in itertools.product((0, 1), repeat=n):
            erased = np.array(pattern, dtype=bool)
            if any(not w[~erased].any() for w in words):
                fail += (1 - p) ** erased.sum() * p ** (~erased).sum()
        assert fail <= pe_union_bound(p, k, dmin) + 1e-12


def test_entropy_inverse():
    assert inverse_binary_entropy(0.9) == pytest.approx(0.316, abs=1e-3)
    assert inverse_binary_entropy(0.5) == pytest.approx(0.110, abs=1e-3)
    for y in np.linspace(0.01, 0.99, 25):
        assert binary_entropy(inverse_binary_entropy(y)) == pytest.approx(y, abs=1e-9)


def test_dmin_gv():
    assert dmin_gv_estimate(50, 5) == 16
    assert dmin_gv_estimate(100, 50) == 11
    assert dmin_gv_estimate(40, 39) >= 1
    with pytest.raises(ValueError):
        dmin_gv_estimate(5, 5)


def test_threshold_closed_form():
    got = solve_threshold(ThresholdQuery(2, 1, 2.0))
    assert got == pytest.approx(math.sqrt(2 - math.sqrt(2)), abs=1e-6)


def test_threshold_edges():
    assert solve_threshold(ThresholdQuery(2, 1, 10.0)) == 0.0
    capped = solve_threshold(ThresholdQuery(20, 3, 0.1))
    assert isinstance(capped, CappedAtOne) and capped == 1.0
    with pytest.raises(ValueError):
        ThresholdQuery(10, 2, 0.0)
    with pytest.raises(ValueError):
        ThresholdQuery(10, 2, 0.1, convention="square")


@pytest.mark.parametrize("convention", ["pow", "linear"])
@pytest.mark.parametrize("n", [20, 30, 45])
def test_bisection_accuracy(n, convention):
    q = ThresholdQuery(n, 2, 0.1, convention=convention)
    p = solve_threshold(q)
    f = threshold_objective(q)
    assert f(p + 1e-6) <= q.theta <= f(max(p - 1e-6, 0.0))


@settings(max_examples=25, deadline=None)
@given(st.integers(10, 60), st.integers(1, 3), st.sampled_from(["pow", "linear"]))
def test_exact_below_union_bound(n, r, convention):
    exact = solve_threshold(ThresholdQuery(n, r, 0.1, "exact", convention=convention))
    union = solve_threshold(ThresholdQuery(n, r, 0.1, "union", convention=convention))
    assert exact <= union


def test_p0_examples():
    assert p0_unique_consistency(0, 0, 1, 1, 1 / math.e) == pytest.approx(1.0)
    assert p0_unique_consistency(2, 2, 10, 10, 0.1) == pytest.approx((4 * math.log(2) + math.log(10)) / 100)
    ratio = p0_unique_consistency(3, 2, 5, 7, 0.2) / p0_unique_consistency(3, 2, 10, 14, 0.2)
    assert ratio == pytest.approx(4.0)
