from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import integrate

from quantmatch.distributions import ExtremeValue, Normal
from quantmatch.empirical import ProbabilityGrid, QuantileSet, sample_quantiles
from quantmatch.errors import FormatError, PreconditionError
from quantmatch.hub_io import CANONICAL_LEVELS
from quantmatch.nonparametric import (
    KdeDistribution,
    SplineDistribution,
    TailFamily,
    collapse_ties,
    kde_fit,
    parse_matched,
    silverman_bandwidth,
    spl_fit,
)

GRID = np.asarray(CANONICAL_LEVELS)


def increasing_sets(min_size=2, max_size=12):
    """Strictly increasing values on strictly increasing levels."""

    @st.composite
    def build(draw):
        k = draw(st.integers(min_size, max_size))
        probs = sorted(draw(st.sets(st.integers(1, 999), min_size=k, max_size=k)))
        steps = draw(st.lists(st.floats(1e-3, 50), min_size=k, max_size=k))
        start = draw(st.floats(-100, 100))
        values = start + np.cumsum(steps)
        assume(np.all(np.diff(values) > 0))
        return QuantileSet.from_arrays(np.array(probs) / 1000, values)

    return build()


# -- SPL -----------------------------------------------------------------------


@pytest.mark.parametrize("tails", list(TailFamily))
def test_spl_round_trip_on_grid(tails):
    qs = sample_quantiles(np.random.default_rng(0).exponential(size=300), GRID)
    d = spl_fit(qs, tails)
    np.testing.assert_allclose(d.quantile(qs.probs), qs.values, atol=1e-9)
    np.testing.assert_allclose(d.cdf(qs.values), qs.probs, atol=1e-12)


@given(increasing_sets())
def test_spl_interpolates_any_increasing_input(qs):
    d = spl_fit(qs)
    assert np.max(np.abs(d.cdf(qs.values) - qs.probs)) <= 1e-12
    np.testing.assert_allclose(d.quantile(qs.probs), qs.values, atol=1e-9 * max(1.0, np.abs(qs.values).max()))


def test_spl_two_point_symmetry():
    d = spl_fit(QuantileSet.from_arrays([0.25, 0.75], [0.0, 1.0]), "NormalTails")
    assert d.cdf(0.5) == pytest.approx(0.5, abs=1e-15)


def test_spl_rejects_bad_inputs():
    with pytest.raises(PreconditionError):
        spl_fit(QuantileSet.from_arrays([0.2, 0.5, 0.8], [0.0, 1.0, 0.5]))
    with pytest.warns(RuntimeWarning), pytest.raises(PreconditionError):
        spl_fit(QuantileSet.from_arrays([0.2, 0.8], [1.0, 1.0]))


def test_spl_monotone_derivative():
    qs = sample_quantiles(np.random.default_rng(1).standard_t(3, size=80), GRID)
    d = spl_fit(qs)
    x = np.linspace(qs.values[0], qs.values[-1], 10_000)
    assert np.all(d.pdf(x) >= 0)
    assert np.all(np.diff(d.cdf(x)) >= 0)


@pytest.mark.parametrize("tails", list(TailFamily))
def test_spl_is_a_distribution(tails):
    qs = QuantileSet.from_arrays(GRID, np.exp(Normal(0, 0.5).quantile(GRID)))
    d = spl_fit(qs, tails)
    lo, hi = d.quantile([1e-9, 1 - 1e-9])
    total = integrate.quad(d.pdf, lo, hi, points=list(d.breakpoints()), limit=500)[0]
    assert total == pytest.approx(1.0, abs=1e-6)
    # continuity of the CDF at the outer knots
    for xk, pk in ((qs.values[0], GRID[0]), (qs.values[-1], GRID[-1])):
        assert d.cdf(xk - 1e-9) == pytest.approx(pk, abs=1e-7)
        assert d.cdf(xk + 1e-9) == pytest.approx(pk, abs=1e-7)


def test_collapse_ties_mean_probability():
    with pytest.warns(RuntimeWarning):
        x, p = collapse_ties(np.array([0.0, 1.0, 1.0, 2.0]), np.array([0.1, 0.3, 0.5, 0.9]))
    np.testing.assert_array_equal(x, [0.0, 1.0, 2.0])
    np.testing.assert_allclose(p, [0.1, 0.4, 0.9])


def test_spl_text_round_trip():
    d = spl_fit(QuantileSet.from_arrays(GRID, Normal(2, 3).quantile(GRID)), "ExponentialTails")
    back = parse_matched(d.to_text())
    assert isinstance(back, SplineDistribution)
    x = np.linspace(-10, 14, 97)
    np.testing.assert_array_equal(back.cdf(x), d.cdf(x))


# -- KDE -----------------------------------------------------------------------


def test_kde_pdf_integrates_to_one():
    qs = QuantileSet.from_arrays([0.1, 0.4, 0.6, 0.9], [-2.0, 0.0, 0.5, 3.0])
    d = kde_fit(qs, bandwidth=0.7)
    assert integrate.quad(d.pdf, -np.inf, np.inf)[0] == pytest.approx(1.0, abs=1e-10)
    assert d.cdf(1e6) == 1.0 and d.cdf(-1e6) == 0.0


def test_kde_preconditions():
    with pytest.raises(PreconditionError):
        kde_fit(QuantileSet.from_arrays([0.5], [1.0]))
    qs = QuantileSet.from_arrays([0.25, 0.75], [0.0, 1.0])
    for h in (0.0, -1.0):
        with pytest.raises(PreconditionError):
            kde_fit(qs, bandwidth=h)


def test_kde_default_bandwidth_is_silverman():
    qs = QuantileSet.from_arrays(GRID, Normal(0, 1).quantile(GRID))
    v = qs.values
    iqr = np.quantile(v, 0.75) - np.quantile(v, 0.25)
    expected = 0.9 * min(np.std(v, ddof=1), iqr / 1.34) * 23 ** -0.2
    assert silverman_bandwidth(v) == pytest.approx(expected, rel=1e-14)
    assert kde_fit(qs).bandwidth == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_kde_underestimates_extreme_value_tail(seed):
    truth = ExtremeValue(0, 1)
    qs = sample_quantiles(truth.sample(1000, np.random.default_rng(seed)), GRID)
    x = truth.quantile(0.999)
    assert kde_fit(qs).pdf(x) < truth.pdf(x)


@given(st.floats(-50, 50), st.lists(st.floats(0.01, 10), min_size=1, max_size=6))
def test_kde_symmetric_median(c, half):
    offsets = np.cumsum(half)
    values = np.concatenate([c - offsets[::-1], [c], c + offsets])
    k = values.size
    probs = np.arange(1, k + 1) / (k + 1)
    d = kde_fit(QuantileSet.from_arrays(probs, values))
    assert d.quantile(0.5) == pytest.approx(c, abs=1e-9 * max(1.0, abs(c), offsets[-1]))


def test_kde_text_round_trip():
    d = kde_fit(QuantileSet.from_arrays([0.2, 0.5, 0.8], [1.0, 2.0, 4.0]), bandwidth=0.4)
    back = parse_matched(d.to_text())
    assert isinstance(back, KdeDistribution)
    assert back.bandwidth == 0.4
    np.testing.assert_array_equal(back.cdf([0.5, 2.5]), d.cdf([0.5, 2.5]))


def test_parse_matched_rejects_garbage():
    for text in ("Normal(0, 1)", "SPL(x=1,2 p=0.1)", "KDE(bandwidth=abc centers=1)"):
        with pytest.raises(FormatError):
            parse_matched(text)
