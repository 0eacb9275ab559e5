from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyaurn import corpus
from polyaurn.mean_engine import (
    ProductChain,
    exact_mean,
    fit_loglog_slope,
    lsoff_case,
    lsoff_sum,
    product,
    projected_product_norm,
    transition_factor,
    verify_lsof,
)
from polyaurn.spectral import eigen_decompose
from polyaurn.urn_core import UrnSpec, intensity_matrix


def test_factor_polya(polya):
    np.testing.assert_allclose(transition_factor(polya, 0), 1.5 * np.eye(2))


def test_factor_friedman(friedman):
    np.testing.assert_allclose(transition_factor(friedman, 2), [[1, 0.25], [0.25, 1]])


def test_empty_product(friedman):
    np.testing.assert_array_equal(product(friedman, 4, 4), np.eye(2))


def test_friedman_prefix_frozen(friedman):
    # (I + A/4)(I + A/3)(I + A/2), rational arithmetic
    expected = np.array([[Fraction(11, 8), Fraction(9, 8)], [Fraction(9, 8), Fraction(11, 8)]], dtype=float)
    np.testing.assert_allclose(product(friedman, 0, 3), expected, rtol=1e-15)


def test_polya_mean_linear(polya):
    for n in (0, 1, 5, 40):
        np.testing.assert_allclose(exact_mean(polya, n), [1 + n / 2, 1 + n / 2], rtol=1e-13)


def test_friedman_mean_two_steps():
    spec = UrnSpec.deterministic((1, 1), [(0, 1), (1, 0)], (2, 1))
    # exact enumeration: {(2,3): 1/3, (3,2): 7/12, (4,1): 1/12}
    np.testing.assert_allclose(exact_mean(spec, 2), [11 / 4, 9 / 4], rtol=1e-15)


def test_mean_total_weight(corpus_urn):
    for n in (3, 17, 200):
        assert corpus_urn.a @ exact_mean(corpus_urn, n) == pytest.approx(corpus_urn.w0 + n * (
            exact_mean(corpus_urn, 1) @ corpus_urn.a - corpus_urn.w0), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 30), st.integers(0, 30), st.integers(0, 30))
def test_composition(i, j, k):
    i, j, k = sorted((i, j, k))
    spec = corpus.load("three_colour")
    ch = ProductChain.from_spec(spec)
    np.testing.assert_allclose(ch.product(j, k) @ ch.product(i, j), ch.product(i, k), rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(0, 40))
def test_commutes_with_projections(i, d):
    spec = corpus.load("three_colour")
    A = intensity_matrix(spec)
    sp = eigen_decompose(A)
    F = product(spec, i, i + d)
    for c in sp.components:
        np.testing.assert_allclose(c.P @ F, F @ c.P, atol=1e-9 * (1 + np.abs(F).max()))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 50), st.integers(0, 50))
def test_left_eigenvector_telescopes(i, d):
    spec = corpus.load("critical")
    ch = ProductChain.from_spec(spec)
    j = i + d
    np.testing.assert_allclose(spec.a @ ch.product(i, j), ch.weight(j) / ch.weight(i) * spec.a, rtol=1e-12)


def test_backward_products_match(critical):
    ch = ProductChain.from_spec(critical)
    Fs = ch.backward_products(20, start=1)
    for i in (1, 7, 20):
        np.testing.assert_allclose(Fs[i - 1], ch.product(i, 20), rtol=1e-12)


def test_projected_norm_polya(polya):
    # A = I, w_k = 2 + k: F_{1,10} = prod (1 + 1/(2+k)) = 12/3
    sp = eigen_decompose(intensity_matrix(polya))
    assert projected_product_norm(sp, polya, 1, 1, 10) == pytest.approx(4.0, rel=1e-13)


def test_projected_norm_friedman(friedman):
    sp = eigen_decompose(intensity_matrix(friedman))
    # lambda = 1 direction: prod (1 + 1/(2+k)) for k = 1..8 = 11/3
    assert projected_product_norm(sp, friedman, 1, 1, 9) == pytest.approx(11 / 3, rel=1e-12)


def test_projected_norm_bad_range(friedman):
    sp = eigen_decompose(intensity_matrix(friedman))
    with pytest.raises(ValueError):
        projected_product_norm(sp, friedman, 1, 0, 3)


def test_lsoff_identity_matrix_exact():
    # A = I: ||F_{i,n}|| = w_n / w_i, so the square sum is w_n^2 sum 1/w_i^2
    ch = ProductChain(np.eye(2), 2.0, 1.0)
    sp = eigen_decompose(np.eye(2))
    n = 50
    wn = 2 + n
    expected = sum((wn / (2 + i)) ** 2 for i in range(1, n + 1))
    assert lsoff_sum(sp, ch, 1, n) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("lam, b, nu, expected", [
    (-1, 1, 0, (1.0, 0)),
    (2, 4, 0, (1.0, 1)),
    (2, 4, 1, (1.0, 3)),
    (3, 5, 0, (1.2, 0)),
    (3, 5, 2, (1.2, 4)),
])
def test_lsoff_case_table(lam, b, nu, expected):
    e, lp = lsoff_case(lam, b, nu)
    assert e == pytest.approx(expected[0]) and lp == expected[1]


def _slope(spec, lam, lo=7, hi=14):
    sp = eigen_decompose(intensity_matrix(spec))
    ch = ProductChain.from_spec(spec)
    ns = 2 ** np.arange(lo, hi + 1)
    c = sp.component(lam)
    e, lp = lsoff_case(c.lam, ch.b, c.nu)
    s, _, _ = fit_loglog_slope(ns, [lsoff_sum(sp, ch, lam, int(n)) for n in ns], lp)
    return s, e


def test_lsoff_small(friedman):
    s, e = _slope(friedman, -1)
    assert abs(s - e) <= 0.05


def test_lsoff_critical(critical):
    s, e = _slope(critical, 2)
    assert abs(s - e) <= 0.05


def test_lsoff_large_upper_bound_at_larger_n(large):
    # the n^{1.2} rate is approached from above; the bound holds on the upper grid
    s, e = _slope(large, 3, 9, 16)
    assert s <= e + 0.05
    assert s >= e


def test_fit_loglog_exact_power():
    x = 2.0 ** np.arange(3, 12)
    s, c, se = fit_loglog_slope(x, 3 * x**1.5 * np.log(x) ** 2, log_power=2)
    assert s == pytest.approx(1.5, abs=1e-12) and np.exp(c) == pytest.approx(3, rel=1e-10)
    assert se < 1e-10


def test_verify_lsof_corpus(corpus_urn):
    sp = eigen_decompose(intensity_matrix(corpus_urn))
    for c in sp.components:
        v = verify_lsof(sp, corpus_urn, c.lam)
        assert v.passed, v


def test_verify_lsof_jordan_log_factor():
    A = np.array([[2.0, 1.0], [0.0, 2.0]])
    ch = ProductChain(A, 2.0, 4.0)
    sp = eigen_decompose(A)
    with_log = verify_lsof(sp, ch, 2, tolerance=0.01)
    assert with_log.log_power_theoretical == 1
    assert with_log.passed
    # ignoring the Jordan block pushes the fitted power clearly past 1/2
    without = verify_lsof(sp, ch, 2, tolerance=0.01, include_log_power=False)
    assert not without.passed


def test_verify_lsof_identity_slope():
    ch = ProductChain(np.eye(2), 2.0, 1.0)
    v = verify_lsof(eigen_decompose(np.eye(2)), ch, 1)
    assert v.passed and abs(v.exponent_fitted - 1.0) <= 1e-3


def test_verify_lsof_large_lambda2(large):
    sp = eigen_decompose(intensity_matrix(large))
    v = verify_lsof(sp, large, 3)
    assert v.passed and abs(v.exponent_fitted - 0.6) <= 0.01


def test_verify_lsof_degenerate_grid(friedman):
    sp = eigen_decompose(intensity_matrix(friedman))
    with pytest.raises(ValueError, match="degenerate grid"):
        verify_lsof(sp, friedman, -1, grid=[(1, 2), (2, 4), (3, 6)])
