import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyaurn import corpus
from polyaurn.analysis import (
    StateSpaceError,
    burkholder_check,
    coin_flip_differences,
    exact_central_moment,
    exact_distribution,
    fit_growth,
    lambda_case,
    mc_central_moment,
    projected_moment,
    theorem_t2_case,
    theorem_t3_check,
    urn_martingale_differences,
)
from polyaurn.mean_engine import exact_mean, exact_mean_series
from polyaurn.simulator import TenabilityError, run_batch
from polyaurn.spectral import classify_urn, eigen_decompose
from polyaurn.urn_core import UrnSpec, intensity_matrix


def _classify(spec):
    b = float(spec.a @ exact_mean(spec, 1) - spec.w0)
    return classify_urn(eigen_decompose(intensity_matrix(spec)), b)


# -- exact enumeration ---------------------------------------------------------

def test_polya_two_steps(polya):
    d = exact_distribution(polya, 2)
    assert d.marginal(0) == {1: Fraction(1, 3), 2: Fraction(1, 3), 3: Fraction(1, 3)}
    assert d.total_probability() == 1


def test_point_mass_at_zero(corpus_urn):
    if not corpus_urn.is_integer_valued():
        pytest.skip("non-integer urn")
    d = exact_distribution(corpus_urn, 0)
    assert d.support == {tuple(int(v) for v in corpus_urn.initial): 1}
    assert exact_central_moment(d).norm == 0


def test_friedman_one_step(friedman):
    d = exact_distribution(friedman, 1)
    assert d.support == {(1, 2): Fraction(1, 2), (2, 1): Fraction(1, 2)}


def test_friedman_two_steps_frozen():
    spec = UrnSpec.deterministic((1, 1), [(0, 1), (1, 0)], (2, 1))
    d = exact_distribution(spec, 2)
    assert d.support == {(2, 3): Fraction(1, 3), (3, 2): Fraction(7, 12), (4, 1): Fraction(1, 12)}
    assert d.mean() == [Fraction(11, 4), Fraction(9, 4)]


@pytest.mark.parametrize("n", range(0, 13))
def test_polya_variance_formula(polya, n):
    d = exact_distribution(polya, n)
    assert d.marginal(0) == {k: Fraction(1, n + 1) for k in range(1, n + 2)}
    cm = exact_central_moment(d, exact_mean(polya, n))
    assert cm.variance[0] == Fraction(n * n + 2 * n, 12)


@pytest.mark.parametrize("name", ["polya", "friedman", "critical", "large", "triangular",
                                  "random_replacement", "three_colour"])
def test_dp_mean_matches_product_formula(name):
    spec = corpus.load(name)
    for n in (1, 5, 12):
        d = exact_distribution(spec, n)
        assert d.total_probability() == 1
        mf = np.array([float(v) for v in d.mean()])
        np.testing.assert_allclose(mf, exact_mean(spec, n), rtol=1e-10, atol=1e-10)


def test_dp_cap():
    with pytest.raises(StateSpaceError):
        exact_distribution(corpus.load("three_colour"), 12, cap=50)


def test_dp_tenability():
    spec = UrnSpec.deterministic((1, 1), [(-2, 3), (0, 1)], (1, 1))
    with pytest.raises(TenabilityError):
        exact_distribution(spec, 2)


def test_dp_rejects_real_atoms():
    spec = UrnSpec.deterministic((1, 1), [(0.5, 0.5), (0, 1)], (1, 1))
    with pytest.raises(ValueError):
        exact_distribution(spec, 2)


def test_mean_mismatch_detected(polya):
    with pytest.raises(ArithmeticError):
        exact_central_moment(exact_distribution(polya, 3), [1.0, 1.0])


def test_polya_mc_matches_dp(polya):
    n = 12
    batch = run_batch(polya, n, 100_000, 99)
    ms = exact_mean_series(polya, batch.grid)
    d = exact_distribution(polya, n)
    for p in (2, 3, 4):
        rep = mc_central_moment(batch, ms, p)
        exact = exact_central_moment(d, p=p).norm
        assert abs(rep.estimate[-1] - exact) <= 3 * rep.stderr[-1]


def test_mc_refuses_small_batches(polya):
    batch = run_batch(polya, 8, 50, 1)
    with pytest.raises(ValueError, match="at least 100"):
        mc_central_moment(batch, exact_mean_series(polya, batch.grid))


def test_mc_report_shape(friedman):
    batch = run_batch(friedman, 64, 200, 1)
    rep = mc_central_moment(batch, exact_mean_series(friedman, batch.grid), 2)
    assert np.all(np.diff(rep.n) > 0)
    assert np.all(rep.estimate >= 0) and np.all(rep.stderr >= 0)


def test_mc_reorder_invariant(friedman):
    batch = run_batch(friedman, 64, 300, 2)
    ms = exact_mean_series(friedman, batch.grid)
    a = mc_central_moment(batch, ms, 2).estimate
    perm = np.random.default_rng(0).permutation(300)
    batch.states = batch.states[perm]
    b = mc_central_moment(batch, ms, 2).estimate
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_projection_on_lambda1_vanishes(friedman):
    batch = run_batch(friedman, 256, 200, 4)
    ms = exact_mean_series(friedman, batch.grid)
    rep = projected_moment(batch, eigen_decompose(intensity_matrix(friedman)), 1, ms)
    w = 2 + batch.grid
    assert np.all(rep.estimate <= 1e-8 * w)


def test_projected_friedman_half_power(friedman):
    batch = run_batch(friedman, 2**14, 2000, 5)
    ms = exact_mean_series(friedman, batch.grid)
    rep = projected_moment(batch, eigen_decompose(intensity_matrix(friedman)), -1, ms)
    f = fit_growth(rep.n, rep.estimate, n_min=64)
    assert abs(f.alpha_hat - 0.5) <= 0.05


# -- growth fits ----------------------------------------------------------------

def test_fit_pure_power():
    n = 2.0 ** np.arange(4, 15)
    f = fit_growth(n, 3 * n**0.6)
    assert abs(f.alpha_hat - 0.6) <= 1e-6


def test_fit_with_log_power():
    n = 2.0 ** np.arange(4, 15)
    f = fit_growth(n, np.sqrt(n * np.log(n)), beta_fixed=0.5)
    assert abs(f.alpha_hat - 0.5) <= 1e-3


@pytest.mark.parametrize("n, m", [
    ([10, 20, 40, 80], [1, 2, 3, 4]),
    ([10, 20, 40, 80, 160], [1, 2, 3, 4, 5]),
    ([10, 100, 1000, 2000, 5000], [1, 2, 0, 4, 5]),
])
def test_fit_degenerate(n, m):
    with pytest.raises(ValueError):
        fit_growth(n, m)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(0.1, 100), st.sampled_from([0.0, 0.5, 1.0, 1.5]))
def test_fit_recovers_exponent(alpha, c, beta):
    n = 2.0 ** np.arange(3, 18)
    f = fit_growth(n, c * n**alpha * np.log(n) ** beta, beta)
    assert abs(f.alpha_hat - alpha) <= 1e-8


# -- case tables ------------------------------------------------------------------

@pytest.mark.parametrize("name, expected", [
    ("friedman", (0.5, 0.0)),
    ("critical", (0.5, 0.5)),
    ("large", (0.6, 0.0)),
])
def test_t2_cases(name, expected):
    e, lp = theorem_t2_case(_classify(corpus.load(name)))
    assert e == pytest.approx(expected[0]) and lp == expected[1]


def test_t2_degenerate_polya(polya):
    assert theorem_t2_case(_classify(polya)) == (1.0, 0.0)


def test_lambda_case():
    assert lambda_case(-1, 1, 0) == (0.5, 0.0)
    assert lambda_case(2, 4, 1) == (0.5, 1.5)
    assert lambda_case(3, 5, 0) == (pytest.approx(0.6), 0.0)


# -- covariance limit -----------------------------------------------------------------

def test_t3_rejects_large_and_degenerate(polya, large):
    batch = run_batch(polya, 16, 100, 0)
    rep = mc_central_moment(batch, exact_mean_series(polya, batch.grid))
    for spec in (polya, large):
        with pytest.raises(ValueError, match="large/degenerate"):
            theorem_t3_check(rep, _classify(spec))


def test_t3_friedman_stabilizes(friedman):
    batch = run_batch(friedman, 2**14, 4000, 12)
    rep = mc_central_moment(batch, exact_mean_series(friedman, batch.grid))
    v = theorem_t3_check(rep, _classify(friedman))
    assert v.passed and v.normalizer == "n"
    # limit covariance of the Friedman urn is (1/12) [[1,-1],[-1,1]]
    sigma = np.array([[1, -1], [-1, 1]]) / 12
    v = theorem_t3_check(rep, _classify(friedman), reference_sigma=sigma)
    assert v.sigma_agrees, v.max_sigma_z


def test_t3_critical_log_normalizer(critical):
    batch = run_batch(critical, 2**14, 2000, 13)
    rep = mc_central_moment(batch, exact_mean_series(critical, batch.grid))
    v = theorem_t3_check(rep, _classify(critical))
    assert v.normalizer == "n (log n)^1"
    assert v.passed


# -- Burkholder ---------------------------------------------------------------------

def test_coin_flip_equality():
    D = coin_flip_differences(64, 20_000, 3)
    v = burkholder_check(D, 2)
    assert v.s_norm == pytest.approx(8.0)  # square function is exactly sqrt(n)
    assert abs(v.x_norm - 8.0) <= 3 * v.x_se
    assert v.passed


def test_single_weight():
    rng = np.random.default_rng(0)
    Y = rng.standard_normal((5000, 1, 2))
    for p in (2, 4):
        v = burkholder_check(Y, p)
        # a single term: ||X|| == ||S|| exactly
        assert v.x_norm == pytest.approx(v.s_norm, rel=1e-12)
        assert v.passed


def test_urn_martingale_p4(friedman):
    D, Y, wsum = urn_martingale_differences(friedman, 128, 2000, 7)
    assert wsum == pytest.approx(1.0)
    v = burkholder_check(D, 4, Y=Y, weight_sq_sum=wsum)
    assert v.passed
    assert v.x_norm < 3 * v.s_norm
    assert v.constant is not None and v.constant > 0


def test_urn_martingale_sum_is_centred_state(friedman):
    n = 64
    D, _, _ = urn_martingale_differences(friedman, n, 150, 8)
    batch = run_batch(friedman, n, 150, 8, grid=[n])
    ch_mean = exact_mean(friedman, n)
    # weights are F_{i,n}(I - P1)/s and P1 kills every Y_i
    from polyaurn.mean_engine import ProductChain
    F = ProductChain.from_spec(friedman).backward_products(n, 1)
    sp = eigen_decompose(intensity_matrix(friedman))
    P1 = sp.components[0].P
    s = math.sqrt(np.sum(np.linalg.norm(F @ (np.eye(2) - P1), 2, axis=(1, 2)) ** 2))
    np.testing.assert_allclose(D.sum(axis=1) * s, batch.states[:, -1] - ch_mean, atol=1e-8)
