import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from uqforge.domain import (
    Beta,
    BoxDomain,
    Concatenated,
    Gamma,
    Gaussian,
    InverseGamma,
    LogNormal,
    TargetDensity,
    Uniform,
    cholesky_lower,
    concatenate,
    intersect_domains,
    log_gaussian_pdf,
    log_pdf,
    log_uniform_pdf,
    prior_moments,
    realize,
)
from uqforge.errors import DecompositionError, EmptyDomainError, InvalidArgumentError


def test_box_rejects_inverted_bounds():
    with pytest.raises(InvalidArgumentError):
        BoxDomain([1.0], [0.0])
    with pytest.raises(InvalidArgumentError):
        BoxDomain([0.0, 0.0], [1.0])


def test_box_contains_is_inclusive():
    box = BoxDomain([0.0, -1.0], [1.0, 1.0])
    assert box.contains([0.0, 1.0])
    assert not box.contains([1.0000001, 0.0])
    assert box.volume == 2.0


def test_intersection():
    a = BoxDomain([-15, -15], [15, 15])
    b = BoxDomain([0, -20], [30, 1])
    c = intersect_domains(a, b)
    assert c == BoxDomain([0, -15], [15, 1])
    with pytest.raises(EmptyDomainError):
        intersect_domains(BoxDomain([0.0], [1.0]), BoxDomain([2.0], [3.0]))


def test_uniform_log_density():
    box = BoxDomain([-15.0, -15.0], [15.0, 15.0])
    assert log_uniform_pdf([0, 0], box) == pytest.approx(-math.log(900.0))
    assert log_uniform_pdf([16, 0], box) == -math.inf


def test_cholesky_errors():
    with pytest.raises(DecompositionError):
        cholesky_lower([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(DecompositionError):
        cholesky_lower([[1.0, 0.5], [0.4, 1.0]])
    L = cholesky_lower([[4.0, 2.0], [2.0, 3.0]])
    np.testing.assert_allclose(L @ L.T, [[4.0, 2.0], [2.0, 3.0]])


def test_log_gaussian_matches_scipy():
    cov = np.array([[4.0, 0.3], [0.3, 1.0]])
    x = np.array([0.5, 1.0])
    ref = stats.multivariate_normal([-1, 2], cov).logpdf(x)
    assert log_gaussian_pdf(x, [-1, 2], cov) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize(
    "prior, ref",
    [
        (Beta(3.0, 0.5), stats.beta(3.0, 0.5)),
        (Gamma(2.0, 1.5), stats.gamma(2.0, scale=1.5)),
        (InverseGamma(3.0, 2.0), stats.invgamma(3.0, scale=2.0)),
        (LogNormal(0.2, 0.7), stats.lognorm(0.7, scale=math.exp(0.2))),
    ],
)
def test_scalar_priors_match_scipy(prior, ref):
    for v in (0.1, 0.5, 0.9):
        assert prior.log_pdf([v]) == pytest.approx(ref.logpdf(v), rel=1e-10)
    rng = np.random.default_rng(4)
    draws = prior.sample(rng, 20000)[:, 0]
    assert stats.kstest(draws, ref.cdf).pvalue > 1e-3


def test_beta_endpoint_with_divergent_density():
    b = Beta(3.0, 0.08335837191688)
    assert b.log_pdf([1.0]) == -math.inf
    draws = b.sample(np.random.default_rng(0), 5000)
    assert np.all(draws < 1.0)
    assert np.all(np.isfinite([b.log_pdf(x) for x in draws]))


def test_gaussian_prior_sampling_moments():
    g = Gaussian(np.array([-1.0, 2.0]), np.diag([4.0, 1.0]))
    x = g.sample(np.random.default_rng(1), 50000)
    np.testing.assert_allclose(x.mean(axis=0), [-1, 2], atol=0.03)
    np.testing.assert_allclose(x.var(axis=0), [4, 1], rtol=0.03)
    assert g.domain == BoxDomain.unbounded(2)


def test_concatenated_prior():
    p = concatenate(Uniform.from_bounds([0.0, 0.0], [3.0, 3.0]), Beta(3.0, 0.5))
    assert isinstance(p, Concatenated)
    assert p.dim == 3
    expected = -math.log(9.0) + stats.beta(3.0, 0.5).logpdf(0.4)
    assert log_pdf(p, [1.0, 2.0, 0.4]) == pytest.approx(expected)
    assert log_pdf(p, [4.0, 2.0, 0.4]) == -math.inf
    x = realize(p, np.random.default_rng(0))
    assert x.shape == (3,)
    mean, var = prior_moments(p)
    np.testing.assert_allclose(mean, [1.5, 1.5, 3.0 / 3.5])


def test_log_pdf_dimension_mismatch():
    with pytest.raises(InvalidArgumentError):
        log_pdf(Uniform.from_bounds([0.0], [1.0]), [0.5, 0.5])


def test_target_density_outside_domain():
    prior = Uniform.from_bounds([0.0], [1.0])
    t = TargetDensity.from_prior(prior, lambda x: -x[0] ** 2, BoxDomain([0.5], [2.0]))
    assert t.evaluate([0.25]) == (-math.inf, -math.inf)
    lp, ll = t.evaluate([0.75])
    assert lp == 0.0 and ll == pytest.approx(-0.5625)
    assert t.log_posterior([0.75]) == pytest.approx(-0.5625)


@settings(max_examples=60, deadline=None)
@given(
    lo=st.floats(-100, 100),
    width=st.floats(0.01, 50),
    u=st.floats(0, 1),
)
def test_uniform_density_integrates_to_one(lo, width, u):
    p = Uniform.from_bounds([lo], [lo + width])
    x = lo + u * width
    assert math.exp(p.log_pdf([x])) * width == pytest.approx(1.0, rel=1e-9)
