import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyaurn import corpus
from polyaurn.mean_engine import ProductChain, exact_mean
from polyaurn.rng import StreamKey
from polyaurn.simulator import (
    TenabilityError,
    checkpoint_grid,
    conditional_mean_check,
    martingale_residual,
    run_batch,
    run_path,
    step,
)
from polyaurn.urn_core import ReplacementDistribution, SpecError, UrnSpec


def test_step_forced_colour(polya):
    rng = np.random.default_rng(0)
    for _ in range(20):
        _, c, _ = step((0, 3), polya, rng)
        assert c == 1


def test_step_zero_activity_colour_never_drawn():
    spec = UrnSpec.deterministic((1, 0), [(1, 0), (0, 1)], (2, 5))
    rng = np.random.default_rng(1)
    assert {step((2, 5), spec, rng)[1] for _ in range(50)} == {0}


def test_step_zero_total_activity(polya):
    with pytest.raises(TenabilityError):
        step((0, 0), polya, np.random.default_rng(0))


def test_step_polya_half(polya):
    rng = np.random.default_rng(5)
    draws = np.array([step((1, 1), polya, rng)[1] for _ in range(4000)])
    assert abs(draws.mean() - 0.5) < 4 * 0.5 / np.sqrt(4000)


def test_long_path_reproducible(polya):
    a = run_path(polya, 10**6, StreamKey(2024))
    b = run_path(polya, 10**6, StreamKey(2024))
    np.testing.assert_array_equal(a.final, b.final)
    assert a.final.sum() == 10**6 + 2


def test_polya_balance(polya):
    t = run_path(polya, 1000, StreamKey(1))
    assert t.final.sum() == 1002


def test_friedman_counts_at_least_one(friedman):
    b = run_batch(friedman, 500, 50, 3)
    assert np.all(b.states >= 1)


def test_broken_spec_reports_violation():
    spec = UrnSpec.deterministic((1, 1), [(-2, 3), (0, 1)], (1, 1))
    t = run_path(spec, 100, StreamKey(0), record_drawn=True)
    assert not t.tenability_ok
    first = int(np.argmax(t.drawn == 0)) + 1
    assert t.failed_at == first
    assert "negative" in t.failure


def test_batch_isolates_failures():
    spec = UrnSpec.deterministic((1, 1), [(-2, 3), (0, 1)], (3, 1))
    b = run_batch(spec, 20, 64, 9)
    assert 0 < np.sum(~b.ok) < 64 or np.all(~b.ok)
    # a failed replicate leaves the others untouched
    for r in np.flatnonzero(b.ok):
        assert np.all(np.isfinite(b.states[r]))


def test_unbalanced_needs_opt_in():
    spec = corpus.load("unbalanced")
    with pytest.raises(SpecError):
        run_batch(spec, 10, 2, 0)
    b = run_batch(spec, 10, 2, 0, allow_unbalanced=True)
    assert np.all(b.ok)


def test_batch_bitwise_repeatable(mixed):
    a = run_batch(mixed, 300, 4, 77)
    b = run_batch(mixed, 300, 4, 77)
    np.testing.assert_array_equal(a.states, b.states)


def test_single_replicate_equals_path(mixed):
    b = run_batch(mixed, 300, 5, 77)
    t = run_path(mixed, 300, StreamKey(77, 3))
    np.testing.assert_array_equal(b.states[3, -1], t.final)


@pytest.mark.parametrize("workers", [2, 3, 8])
def test_workers_do_not_change_output(mixed, workers):
    a = run_batch(mixed, 200, 37, 5)
    b = run_batch(mixed, 200, 37, 5, workers=workers)
    np.testing.assert_array_equal(a.states, b.states)


def test_sub_batches_concatenate(mixed):
    whole = run_batch(mixed, 100, 20, 8)
    left = run_batch(mixed, 100, 12, 8)
    right = run_batch(mixed, 100, 8, 8, first_index=12)
    np.testing.assert_array_equal(whole.states, np.concatenate([left.states, right.states]))


def test_polya_batch_mean_clt(polya):
    n, R = 1000, 10**4
    b = run_batch(polya, n, R, 123)
    x1 = b.states[:, -1, 0]
    se = x1.std(ddof=1) / np.sqrt(R)
    assert abs(x1.mean() - (n + 2) / 2) <= 3 * se


def test_checkpoint_grid():
    np.testing.assert_array_equal(checkpoint_grid(10), [1, 2, 4, 8, 10])
    np.testing.assert_array_equal(checkpoint_grid(8), [1, 2, 4, 8])


@pytest.mark.parametrize("name, n, bound", [
    ("polya", 100, 1e-9), ("friedman", 1000, 1e-8), ("large", 1000, 1e-8),
    ("three_colour", 1000, 1e-8), ("random_replacement", 1000, 1e-8),
])
def test_martingale_residual(name, n, bound):
    spec = corpus.load(name)
    t = run_path(spec, n, StreamKey(4), record_increments=True)
    assert martingale_residual(t, ProductChain.from_spec(spec)) <= bound


def test_residual_needs_increments(friedman):
    t = run_path(friedman, 10, StreamKey(4))
    with pytest.raises(ValueError):
        martingale_residual(t, ProductChain.from_spec(friedman))


def test_balance_conservation_every_step(corpus_urn):
    t = run_path(corpus_urn, 400, StreamKey(6), record_increments=True)
    tot = t.path @ corpus_urn.a
    b = tot[1] - tot[0]
    np.testing.assert_allclose(np.diff(tot), b, rtol=1e-12)


def test_theorem_t0_pathwise(corpus_urn):
    b = run_batch(corpus_urn, 512, 50, 17)
    ch = ProductChain.from_spec(corpus_urn)
    for k, n in enumerate(b.grid):
        dev = b.states[:, k] - exact_mean(corpus_urn, int(n), ch)
        assert np.max(np.abs(dev @ corpus_urn.a)) <= 1e-9 * ch.weight(n)


def test_conditional_mean_exact(polya):
    np.testing.assert_allclose(conditional_mean_check(polya, (1, 1), exact=True), 0, atol=1e-15)


def test_conditional_mean_single_reachable_colour():
    spec = UrnSpec.deterministic((1, 1), [(1, 0), (0, 1)], (0, 4))
    dev = conditional_mean_check(spec, (0, 4), 1000, np.random.default_rng(0))
    np.testing.assert_array_equal(dev, 0)


def test_conditional_mean_friedman_sampled(friedman):
    M = 10**5
    dev = conditional_mean_check(friedman, (2, 1), M, np.random.default_rng(3))
    # one-step increment is (0,1) w.p. 2/3 or (1,0) w.p. 1/3: per-coordinate sd sqrt(2)/3
    sigma = np.sqrt(2) / 3
    assert np.all(np.abs(dev) <= 5 * sigma / np.sqrt(M))


def test_conditional_mean_sample_floor(friedman):
    with pytest.raises(ValueError):
        conditional_mean_check(friedman, (1, 1), 10)


@pytest.mark.parametrize("name", ["friedman", "three_colour", "critical"])
def test_increments_mean_zero(name):
    spec = corpus.load(name)
    R = 4000
    b = run_batch(spec, 64, R, 31, record_increments=True)
    Y = b.increments()  # (R, n, q)
    for n in (0, 10, 63):
        m = Y[:, n].mean(axis=0)
        sd = Y[:, n].std(axis=0, ddof=1)
        assert np.all(np.abs(m) <= 4 * sd / np.sqrt(R) + 1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32), st.permutations(range(6)))
def test_replicate_order_irrelevant(seed, perm):
    spec = corpus.load("friedman")
    whole = run_batch(spec, 50, 6, seed)
    for r in perm:
        t = run_path(spec, 50, StreamKey(seed, r))
        np.testing.assert_array_equal(whole.states[r, -1], t.final)
