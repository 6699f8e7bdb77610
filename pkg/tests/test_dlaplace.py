import math

import numpy as np
import pytest
from scipy import stats

from privmeasure.dlaplace import DiscreteLaplace, pmf, sample, variance


def test_pmf_at_zero_sigma_one():
    p = math.exp(-1)
    assert pmf(1.0, 0) == pytest.approx((1 - p) / (1 + p), rel=1e-15)
    assert pmf(1.0, 0) == pytest.approx(0.46211715726000974, abs=1e-15)


def test_pmf_symmetric():
    lap = DiscreteLaplace(1.7)
    z = np.arange(0, 200)
    assert np.array_equal(lap.pmf(z), lap.pmf(-z))
    assert pmf(1.0, 1) == pmf(1.0, -1)


def test_pmf_sums_to_one_sigma_two():
    z = np.arange(-200, 201)
    assert abs(DiscreteLaplace(2.0).pmf(z).sum() - 1.0) <= 1e-12


@pytest.mark.parametrize("sigma", [0.25, 0.5, 1, 2, 8])
def test_truncated_mass(sigma):
    w = math.ceil(60 * sigma)
    total = math.fsum(DiscreteLaplace(sigma).pmf(np.arange(-w, w + 1)))
    assert 1 - 1e-10 <= total <= 1 + 1e-15


def test_pmf_far_tail_does_not_underflow_to_garbage():
    lap = DiscreteLaplace(0.5)
    val = lap.pmf(400)
    assert 0.0 <= val < 1e-300 or val == 0.0
    assert np.isfinite(lap.logpmf(10**6))


def test_cdf_and_tail_match_sums():
    lap = DiscreteLaplace(3.0)
    z = np.arange(-300, 301)
    cum = np.cumsum(lap.pmf(z))
    for w in (-5, 0, 4, 17):
        assert lap.cdf(w) == pytest.approx(cum[w + 300], abs=1e-12)
    for w in (0, 3, 40):
        assert lap.tail(w) == pytest.approx(1 - cum[w + 300], abs=1e-12)


def test_variance_sigma_one():
    v = variance(1.0)
    p = math.exp(-1)
    assert v == pytest.approx(2 * p / (1 - p) ** 2, rel=1e-14)
    # independent check by summing z^2 pmf(z)
    z = np.arange(-80, 81)
    assert v == pytest.approx(math.fsum(z**2 * pmf(1.0, z)), abs=1e-12)
    assert v == pytest.approx(1.8413471884155, abs=1e-12)
    assert v < 2.0


def test_variance_matches_moment_sum():
    lap = DiscreteLaplace(0.5)
    z = np.arange(-100, 101)
    assert abs(math.fsum(z**2 * lap.pmf(z)) - lap.variance()) <= 1e-10


@pytest.mark.parametrize("sigma", [0.1, 0.5, 1, 3, 10, 100])
def test_variance_below_continuous(sigma):
    assert variance(sigma) < 2 * sigma**2


def test_variance_ratio_tends_to_one():
    ratios = [variance(s) / (2 * s * s) for s in (10, 100, 1000)]
    assert ratios[0] < ratios[1] < ratios[2] < 1
    assert ratios[-1] == pytest.approx(1, abs=1e-6)


def test_difference_of_geometrics_is_discrete_laplace():
    # brute-force convolution of the two geometric laws, compared to the pmf
    for sigma in (0.5, 1.0, 4.0):
        q = -math.expm1(-1 / sigma)
        k = np.arange(1, 4000)
        geo = q * (1 - q) ** (k - 1)
        conv = np.convolve(geo, geo[::-1])
        z = np.arange(-(len(k) - 1), len(k))
        sel = np.abs(z) <= 30
        assert np.allclose(conv[sel], DiscreteLaplace(sigma).pmf(z[sel]), rtol=0, atol=1e-13)


def test_sample_moments():
    rng = np.random.default_rng(11)
    x = sample(1.0, rng, size=10**6)
    v = variance(1.0)
    assert abs(x.mean()) <= 3 * math.sqrt(v / 1e6)
    # standard error of the sample variance from the fourth moment
    z = np.arange(-200, 201)
    m4 = float(np.sum(z.astype(float) ** 4 * pmf(1.0, z)))
    se = math.sqrt((m4 - v * v) / 1e6)
    assert abs(x.var() - v) <= 3 * se


def test_sample_chi_squared():
    sigma = 2.0
    rng = np.random.default_rng(5)
    x = sample(sigma, rng, size=10**6)
    w = math.ceil(10 * sigma)
    lap = DiscreteLaplace(sigma)
    bins = np.arange(-w, w + 1)
    observed = np.array([np.sum(x < -w)] + [np.sum(x == b) for b in bins] + [np.sum(x > w)])
    probs = np.concatenate([[lap.cdf(-w - 1)], lap.pmf(bins), [lap.tail(w)]])
    _, pval = stats.chisquare(observed, probs / probs.sum() * len(x))
    assert pval > 0.001


def test_sample_deterministic():
    a = sample(3.0, np.random.default_rng(9), size=1000)
    b = sample(3.0, np.random.default_rng(9), size=1000)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("sigma", [0, -1, math.inf, math.nan])
def test_rejects_bad_sigma(sigma):
    with pytest.raises(ValueError):
        DiscreteLaplace(sigma)
