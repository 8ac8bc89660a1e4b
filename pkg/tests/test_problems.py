import math

import numpy as np
import pytest
from scipy import integrate, stats

from uqforge import problems


def test_gravity_dataset_shape():
    assert problems.GRAVITY_DATA.shape == (14, 3)
    assert np.all(problems.GRAVITY_DATA > 0)


def test_fall_time_entry():
    assert problems.fall_times(9.8, [10.0])[0] == pytest.approx(math.sqrt(20 / 9.8))
    assert problems.fall_times(9.8)[0] == pytest.approx(1.4285714285714286)


def test_gravity_loglike_matches_direct_sum():
    h, t, s = problems.GRAVITY_DATA.T
    for g in (8.5, 9.76, 10.9):
        direct = -0.5 * sum((math.sqrt(2 * hi / g) - ti) ** 2 / si ** 2 for hi, ti, si in zip(h, t, s))
        assert problems.gravity_loglike([g]) == pytest.approx(direct, rel=1e-13)


def test_gravity_qoi_default_constants():
    q = problems.gravity_qoi()
    assert q(np.array([9.8]))[0] == pytest.approx(25.0 / 9.8)


def test_bimodal_loglike_matches_scipy_and_survives_tails():
    for x in (10.0, 55.0, 100.0):
        ref = math.log(0.5 * stats.norm.pdf(x, 10, 1) + 0.5 * stats.norm.pdf(x, 100, 5))
        assert problems.bimodal_loglike([x]) == pytest.approx(ref, rel=1e-12)
    # Both densities underflow here; the log-space form stays finite.
    for x in (-200.0, 240.0):
        ref = stats.norm.logpdf(x, 100, 5) + math.log(0.5)
        assert problems.bimodal_loglike([x]) == pytest.approx(ref, rel=1e-12)


def test_bimodal_evidence_oracle():
    f = lambda x: (0.5 * stats.norm.pdf(x, 10, 1) + 0.5 * stats.norm.pdf(x, 100, 5)) / 500  # noqa: E731
    z, _ = integrate.quad(f, -250, 250, points=[10, 100], limit=200)
    assert math.log(z) == pytest.approx(-6.2146, abs=1e-4)


def _modal_oracle(theta, modes):
    t1, t2, s2 = theta
    up = 10 * math.sqrt(10 * t1 + 20 * t2 + 10 * math.sqrt(t1 ** 2 + 4 * t2 ** 2))
    total = sum((up - d) ** 2 for d in (72.0470, 71.8995, 72.2801, 71.9421, 72.3578))
    if modes == 1:
        return -2.5 * math.log(2 * math.pi * s2) - total / (2 * s2)
    down = 10 * math.sqrt(10 * t1 + 20 * t2 - 10 * math.sqrt(t1 ** 2 + 4 * t2 ** 2))
    total += sum((down - d) ** 2 for d in (28.0292, 27.3726, 27.5388, 27.0357, 27.1588))
    return -5 * math.log(2 * math.pi * s2) - total / (2 * s2)


def test_modal_frozen_values():
    assert problems.modal_loglike(1)([1.0, 2.0, 0.1]) == pytest.approx(-13699.964254895018, rel=1e-12)
    assert problems.modal_loglike(2)([1.0, 2.0, 0.1]) == pytest.approx(-13821.215639725106, rel=1e-12)


@pytest.mark.parametrize("modes", [1, 2])
def test_modal_matches_oracle(modes):
    rng = np.random.default_rng(modes)
    ll = problems.modal_loglike(modes)
    for _ in range(100):
        theta = [rng.uniform(0, 3), rng.uniform(0, 3), rng.uniform(1e-3, 0.3)]
        assert ll(theta) == pytest.approx(_modal_oracle(theta, modes), rel=1e-10)


def test_modal_priors():
    assert problems.modal_prior(1).dim == 3
    p = problems.modal_prior(2, concatenated=True)
    assert p.log_pdf([1.0, 1.0, 0.5]) == pytest.approx(-math.log(9) + stats.beta(3, 0.08335837191688).logpdf(0.5))
    with pytest.raises(ValueError):
        problems.modal_prior(3)


def test_line_exact_indices():
    s = problems.line_exact_indices(2.0)
    assert s["m"] == pytest.approx(0.6923076923, rel=1e-9)
    assert s["m"] + s["c"] == pytest.approx(1.0)
