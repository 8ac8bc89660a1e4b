import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from uqforge.errors import DegenerateColumnError, InsufficientDataError, InvalidArgumentError
from uqforge.sequence import (
    FilterSpec,
    SampleSequence,
    autocorrelation,
    correlation_matrix,
    ecdf,
    filter_indices,
    filter_sequence,
    gaussian_kde,
    histogram,
    mean_and_covariance,
    silverman_bandwidth,
    unify,
)


def test_mean_and_covariance_uses_unbiased_divisor():
    seq = SampleSequence(np.array([[1.0, 2.0], [3.0, 6.0], [5.0, 4.0]]))
    mean, cov = mean_and_covariance(seq)
    np.testing.assert_allclose(mean, [3.0, 4.0])
    np.testing.assert_allclose(cov, [[4.0, 2.0], [2.0, 4.0]])
    with pytest.raises(InsufficientDataError):
        mean_and_covariance(SampleSequence(np.zeros((1, 2))))


def test_correlation_matrix():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((5000, 2))
    x[:, 1] = 0.6 * x[:, 0] + 0.8 * x[:, 1]
    c = correlation_matrix(SampleSequence(x))
    assert c[0, 0] == 1.0 and c[1, 1] == 1.0
    assert c[0, 1] == pytest.approx(0.6, abs=0.03)
    with pytest.raises(DegenerateColumnError):
        correlation_matrix(SampleSequence(np.column_stack([x[:, 0], np.ones(5000)])))


def test_autocorrelation_of_known_sequence():
    # x = (1, -1, 1, -1): biased estimator gives r(k) = (-1)^k (n-k)/n.
    seq = SampleSequence(np.array([1.0, -1.0, 1.0, -1.0]))
    np.testing.assert_allclose(autocorrelation(seq, 0, 3), [1.0, -0.75, 0.5, -0.25], atol=1e-12)


def test_autocorrelation_of_ar1():
    rng = np.random.default_rng(2)
    n, phi = 100000, 0.7
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0]
    for i in range(1, n):
        x[i] = phi * x[i - 1] + e[i]
    r = autocorrelation(SampleSequence(x), 0, 3)
    np.testing.assert_allclose(r, [1, phi, phi ** 2, phi ** 3], atol=0.02)


def test_autocorrelation_errors():
    with pytest.raises(DegenerateColumnError):
        autocorrelation(SampleSequence(np.ones(10)), 0, 2)
    with pytest.raises(InvalidArgumentError):
        autocorrelation(SampleSequence(np.arange(5.0)), 0, 5)


def test_silverman_bandwidth_value():
    x = np.arange(1.0, 11.0)
    sigma = np.std(x, ddof=1)
    iqr = np.percentile(x, 75) - np.percentile(x, 25)
    assert silverman_bandwidth(x) == pytest.approx(0.9 * min(sigma, iqr / 1.34) * 10 ** -0.2)


def test_kde_integrates_to_one_and_tracks_density():
    rng = np.random.default_rng(3)
    seq = SampleSequence(rng.normal(1.0, math.sqrt(5.0), 20000))
    grid = np.linspace(-12, 14, 2001)
    f = gaussian_kde(seq, 0, grid)
    assert integrate.trapezoid(f, grid) == pytest.approx(1.0, abs=1e-2)
    exact = np.exp(-0.5 * (grid - 1.0) ** 2 / 5.0) / math.sqrt(2 * math.pi * 5.0)
    assert np.max(np.abs(f - exact)) < 0.01


def test_kde_needs_ten_samples():
    with pytest.raises(InsufficientDataError):
        gaussian_kde(SampleSequence(np.arange(9.0)), 0, [0.0])


def test_ecdf_steps():
    seq = SampleSequence(np.array([3.0, 1.0, 2.0, 2.0]))
    assert ecdf(seq, 0, 2.0) == 0.75
    np.testing.assert_allclose(ecdf(seq, 0, [0.0, 1.0, 2.5, 3.0]), [0.0, 0.25, 0.75, 1.0])


def test_histogram_counts():
    counts, edges = histogram(SampleSequence(np.arange(10.0)), 0, bins=5)
    assert counts.tolist() == [2, 2, 2, 2, 2]
    assert edges.shape == (6,)


def test_filter_indices_example():
    assert filter_indices(10, FilterSpec(0.2, 3)).tolist() == [2, 5, 8]
    with pytest.raises(InvalidArgumentError):
        FilterSpec(1.0, 1)
    with pytest.raises(InvalidArgumentError):
        FilterSpec(0.0, 0)


def test_filter_sequence_keeps_log_values_aligned():
    x = np.arange(20.0)
    seq = SampleSequence(x, log_targets=-x, log_likes=2 * x)
    out = filter_sequence(seq, FilterSpec(0.5, 4))
    np.testing.assert_array_equal(out.samples[:, 0], [10, 14, 18])
    np.testing.assert_array_equal(out.log_targets, [-10, -14, -18])
    np.testing.assert_array_equal(out.log_likes, [20, 28, 36])


def test_unify_orders_by_worker():
    a = SampleSequence(np.zeros((2, 1)), origin_worker=1)
    b = SampleSequence(np.ones((3, 1)), origin_worker=0)
    u = unify([a, b])
    assert len(u) == 5
    np.testing.assert_array_equal(u.samples[:, 0], [1, 1, 1, 0, 0])
    with pytest.raises(InvalidArgumentError):
        unify([a, SampleSequence(np.zeros((2, 2)))])


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 500), discard=st.floats(0, 0.99), lag=st.integers(1, 20))
def test_filter_index_properties(n, discard, lag):
    idx = filter_indices(n, FilterSpec(discard, lag))
    assert np.all(np.diff(idx) == lag)
    if idx.size:
        assert idx[0] == math.floor(discard * n)
        assert idx[-1] < n
