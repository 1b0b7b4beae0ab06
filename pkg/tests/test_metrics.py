from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from quantmatch.distributions import Laplace, Normal
from quantmatch.empirical import QuantileSet
from quantmatch.errors import DomainError, PreconditionError
from quantmatch.hub_io import CANONICAL_LEVELS
from quantmatch.metrics import (
    ScoreRecord,
    crps_sample,
    interval_score,
    kld_mc,
    total_variation,
    uwd1,
    uwd1_cdf,
    uwd1_predictive,
    wasserstein_p,
    wis,
    wis_components,
)


def normal_crps(mu, sigma, y):
    # closed form for a normal predictive distribution
    z = (y - mu) / sigma
    return sigma * (z * (2 * stats.norm.cdf(z) - 1) + 2 * stats.norm.pdf(z) - 1 / math.sqrt(math.pi))


def pinball_wis(probs, values, y):
    """WIS through the quantile-loss identity, independent of the interval form."""
    probs, values = np.asarray(probs), np.asarray(values)
    loss = np.where(y < values, (1 - probs) * (values - y), probs * (y - values))
    return float(loss.sum() / ((len(probs) - 1) / 2 + 0.5))


# -- Wasserstein ---------------------------------------------------------------


def test_wasserstein_examples():
    a = Normal(0, 1)
    assert wasserstein_p(a, a) == 0.0
    assert wasserstein_p(a, Normal(0, 1)) == pytest.approx(0.0, abs=1e-12)
    assert wasserstein_p(a, Normal(1, 1)) == pytest.approx(1.0, abs=1e-5)
    # E[Z^2] over (eps, 1 - eps) falls short of 1 by roughly 1e-4
    assert wasserstein_p(a, Normal(0, 2), order=2) == pytest.approx(1.0, abs=1e-4)
    res = wasserstein_p(a, Normal(1, 1), full_output=True)
    assert res.truncation == pytest.approx(2e-6)
    with pytest.raises(PreconditionError):
        wasserstein_p(a, a, order=0.5)


# -- UWD1 ------------------------------------------------------------------------


def test_uwd1_examples():
    u = np.random.default_rng(0).random(50_000)
    assert uwd1(u) < 0.02
    assert uwd1([0.5]) == pytest.approx(0.5, abs=1e-15)
    assert uwd1(np.full(10, 0.5)) == pytest.approx(0.5, abs=1e-15)
    for m in (10, 100, 1000):
        grid = (np.arange(1, m + 1) - 0.5) / m
        # triangles of height and half-width 1/(2m) around each step
        assert uwd1(grid) == pytest.approx(1 / (2 * m), rel=1e-9)


def test_uwd1_domain():
    with pytest.raises(DomainError):
        uwd1([0.2, 1.5])
    with pytest.raises(DomainError):
        uwd1([np.nan])
    with pytest.raises(PreconditionError):
        uwd1([])


@given(st.floats(-20, 20), st.floats(0.05, 20))
def test_uwd1_affine_invariance(a, b):
    draws = np.random.default_rng(1).normal(0.3, 1.4, 500)
    base = uwd1_predictive(draws, Normal(0, 1))
    assert uwd1_predictive(a + b * draws, Normal(a, b)) == pytest.approx(base, abs=1e-9)


def test_uwd1_monotone_transform_invariance():
    draws = np.random.default_rng(2).normal(0.2, 0.8, 2000)
    base = uwd1(stats.norm.cdf(draws))
    # exp pushes both the draws and the reference to the lognormal scale
    assert uwd1(stats.lognorm.cdf(np.exp(draws), s=1.0)) == pytest.approx(base, abs=1e-12)


def test_uwd1_cdf_matches_large_predictive():
    fit, truth = Normal(0.1, 1.2), Normal(0, 1)
    exact = uwd1_cdf(fit, truth)
    mc = uwd1_predictive(fit.sample(400_000, np.random.default_rng(3)), truth)
    assert mc == pytest.approx(exact, abs=0.01)
    assert uwd1_cdf(truth, truth) == pytest.approx(0.0, abs=1e-6)


# -- TV and KLD -----------------------------------------------------------------


def test_total_variation_examples():
    a = Normal(0, 1)
    assert total_variation(a, a) == 0.0
    assert total_variation(a, Normal(0, 1)) == pytest.approx(0.0, abs=1e-9)
    assert total_variation(a, Normal(1, 1)) == pytest.approx(2 * stats.norm.cdf(0.5) - 1, abs=1e-7)
    assert total_variation(a, Normal(100, 1)) == pytest.approx(1.0, abs=1e-6)


def test_total_variation_laplace_normal_oracle():
    # independent grid integration of the same density difference
    x = np.linspace(-30, 30, 2_000_001)
    diff = np.abs(stats.norm.pdf(x) - stats.laplace.pdf(x))
    oracle = 0.5 * integrate.trapezoid(diff, x)
    assert total_variation(Normal(0, 1), Laplace(0, 1)) == pytest.approx(oracle, abs=1e-6)


def test_kld_examples():
    a = Normal(0, 1)
    same = kld_mc(a, Normal(0, 1), 100_000, seed=0)
    assert abs(same.value) <= 3 * max(same.se, 1e-12)
    shifted = kld_mc(a, Normal(1, 1), 100_000, seed=0)
    assert abs(shifted.value - 0.5) <= 3 * shifted.se


def test_kld_lighter_tailed_reference():
    # KL(Laplace(0,1) || N(0,1)) = log(2 pi)/2 - log 2
    exact = 0.5 * math.log(2 * math.pi) - math.log(2)
    for count in (10_000, 100_000):
        r = kld_mc(Laplace(0, 1), Normal(0, 1), count, seed=5)
        assert abs(r.value - exact) <= 3 * r.se
        assert r.value > -3 * r.se


def test_kld_nonfinite_sentinel():
    class Nowhere(Normal):
        def logpdf(self, x):
            out = super().logpdf(x)
            return np.where(np.asarray(x) > 2, -np.inf, out)

    r = kld_mc(Normal(0, 1), Nowhere(0, 1), 10_000, seed=0)
    assert r.value == math.inf and r.nonfinite > 0


# -- scores ------------------------------------------------------------------------


def test_interval_score_examples():
    assert interval_score(0, 2, 0.5, 1) == 2
    assert interval_score(1, 3, 0.2, 4) == pytest.approx(12)
    assert interval_score(1, 3, 0.2, 1) == 2
    with pytest.raises(PreconditionError):
        interval_score(3, 1, 0.2, 2)
    with pytest.raises(PreconditionError):
        interval_score(1, 3, 1.0, 2)


@given(st.floats(-100, 100), st.floats(0, 10), st.floats(0.01, 0.99), st.floats(-100, 100), st.floats(-50, 50))
def test_interval_score_translation(l, width, alpha, y, c):
    r = l + width
    assert interval_score(l + c, r + c, alpha, y + c) == pytest.approx(interval_score(l, r, alpha, y), rel=1e-9, abs=1e-9)


def test_wis_examples():
    qs = QuantileSet.from_arrays([0.1, 0.5, 0.9], [1.0, 2.0, 3.0])
    assert wis(qs, 4.0) == pytest.approx(2.2 / 1.5, abs=1e-12)
    assert wis(QuantileSet.from_arrays([0.1, 0.5, 0.9], [4.0, 4.0, 4.0]), 4.0) == 0.0
    grid = QuantileSet.from_arrays(CANONICAL_LEVELS, Normal(0, 1).quantile(CANONICAL_LEVELS))
    assert len(wis_components(grid, 0.3)[1]) == 11


def test_wis_asymmetric_grid_rejected():
    with pytest.raises(PreconditionError, match="0.3"):
        wis(QuantileSet.from_arrays([0.1, 0.3, 0.5, 0.9], [0, 1, 2, 3]), 1.0)
    with pytest.raises(PreconditionError, match="median"):
        wis(QuantileSet.from_arrays([0.1, 0.9], [0, 1]), 1.0)


@given(st.floats(-10, 10))
def test_wis_equals_pinball_form(y):
    values = Normal(1, 2).quantile(CANONICAL_LEVELS)
    qs = QuantileSet.from_arrays(CANONICAL_LEVELS, values)
    assert wis(qs, y) == pytest.approx(pinball_wis(CANONICAL_LEVELS, values, y), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("z", [-2.0, -1.0, 0.0, 1.0, 2.0])
def test_wis_approximates_crps(z):
    mu, sigma = 3.0, 2.0
    probs = np.arange(1, 100) / 100
    qs = QuantileSet.from_arrays(probs, Normal(mu, sigma).quantile(probs))
    y = mu + z * sigma
    assert wis(qs, y) == pytest.approx(normal_crps(mu, sigma, y), rel=0.03)


def test_crps_examples():
    assert crps_sample([1.5, 1.5, 1.5], 1.5) == 0.0
    assert crps_sample([0.0, 2.0], 1.0) == pytest.approx(0.5)
    draws = np.random.default_rng(0).standard_normal(1_000_000)
    assert crps_sample(draws, 0.0) == pytest.approx(2 * stats.norm.pdf(0) - 1 / math.sqrt(math.pi), abs=0.002)
    with pytest.raises(PreconditionError):
        crps_sample([], 0.0)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=30), st.floats(-100, 100))
def test_crps_matches_pairwise_definition(x, y):
    x = np.asarray(x)
    direct = np.mean(np.abs(x - y)) - 0.5 * np.mean(np.abs(x[:, None] - x[None, :]))
    assert crps_sample(x, y) == pytest.approx(max(direct, 0.0), abs=1e-9)


def test_score_record_nonnegative():
    with pytest.raises(PreconditionError):
        ScoreRecord(("a",), -1.0, 0.0)
