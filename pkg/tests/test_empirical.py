from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from quantmatch.distributions import Exponential, Laplace, Normal, NormalMixture, sample
from quantmatch.empirical import (
    ProbabilityGrid,
    QuantileSet,
    brownian_bridge_cov,
    cholesky,
    pit_transform,
    qclt_cov,
    read_quantile_csv,
    sample_quantiles,
    write_quantile_csv,
)
from quantmatch.errors import DomainError, FormatError, PreconditionError

grids = st.lists(st.floats(0.001, 0.999), min_size=1, max_size=50, unique=True).map(sorted).filter(
    lambda g: np.all(np.diff(g) > 1e-6)
)


def test_sample_quantile_examples():
    assert sample_quantiles([1, 2, 3], [0.5]).values[0] == 2.0
    assert sample_quantiles([1, 2, 3, 4], [0.5]).values[0] == 2.5
    with pytest.raises(PreconditionError):
        sample_quantiles([5.0], [0.5])


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=40), st.floats(0.0001, 0.9999))
def test_type7_matches_hand_formula(data, p):
    # h = (n - 1) p, interpolate between the floor(h)-th and next order statistic
    y = np.sort(data)
    h = (len(y) - 1) * p
    j = math.floor(h)
    expect = y[j] + (h - j) * (y[min(j + 1, len(y) - 1)] - y[j])
    got = sample_quantiles(data, [p]).values[0]
    assert got == pytest.approx(expect, rel=1e-12, abs=1e-6)


def test_sample_size_recorded():
    qs = sample_quantiles(np.arange(10.0), [0.1, 0.9])
    assert qs.sample_size == 10


@pytest.mark.parametrize(
    "probs",
    [[0.5, 0.4], [0.0, 0.5], [0.5, 1.0], [], [0.2, 0.2], [math.nan]],
)
def test_grid_invariants(probs):
    with pytest.raises((PreconditionError, DomainError)):
        ProbabilityGrid(probs)


def test_quantile_set_monotone():
    with pytest.raises(PreconditionError):
        QuantileSet.from_arrays([0.1, 0.2], [2.0, 1.0])
    with pytest.raises(PreconditionError):
        QuantileSet.from_arrays([0.1, 0.2], [1.0])


def test_pit_examples():
    assert pit_transform(Normal(0, 1), QuantileSet.from_arrays([0.5], [0.0]))[0] == 0.5
    assert pit_transform(Exponential(1), QuantileSet.from_arrays([0.5], [math.log(2)]))[0] == pytest.approx(0.5, abs=1e-15)


def test_pit_support_error_names_index():
    with pytest.raises(DomainError, match="index 0"):
        pit_transform(Exponential(1), QuantileSet.from_arrays([0.1, 0.5], [-1.0, 1.0]))


def test_pit_of_mixture_sample_quantiles():
    mix = NormalMixture([0.35, 0.65], [-1.0, 1.2], [0.9, 0.6])
    grid = np.linspace(0.05, 0.95, 19)
    qs = sample_quantiles(sample(mix, 10**6, seed=2), grid)
    u = pit_transform(mix, qs)
    np.testing.assert_allclose(u, grid, atol=0.01)
    assert np.all(np.diff(u) >= 0)


def test_brownian_bridge_examples():
    np.testing.assert_array_equal(brownian_bridge_cov([0.5]), [[0.25]])
    np.testing.assert_allclose(brownian_bridge_cov([0.25, 0.75]), [[0.1875, 0.0625], [0.0625, 0.1875]], rtol=0, atol=1e-17)


@given(grids)
def test_covariances_symmetric_and_factorizable(g):
    for m in (brownian_bridge_cov(g), qclt_cov(Laplace(0, 1), g)):
        np.testing.assert_array_equal(m, m.T)
        L = cholesky(m)
        np.testing.assert_allclose(L @ L.T, m, rtol=1e-6, atol=1e-9 * np.trace(m))


def test_qclt_normal_median():
    assert qclt_cov(Normal(0, 1), [0.5])[0, 0] == pytest.approx(0.25 * 2 * math.pi, rel=1e-14)


@given(mu=st.floats(-10, 10), sigma=st.floats(0.1, 10), g=grids)
def test_qclt_location_scale(mu, sigma, g):
    np.testing.assert_allclose(qclt_cov(Normal(mu, sigma), g), sigma**2 * qclt_cov(Normal(0, 1), g), rtol=1e-12)


def test_qclt_matches_density_form():
    # kappa_ij = (p_i ^ p_j - p_i p_j) / (f(Q(p_i)) f(Q(p_j))), densities from scipy
    p = np.array([0.1, 0.4, 0.8])
    f = stats.laplace.pdf(stats.laplace.ppf(p))
    expect = (np.minimum.outer(p, p) - np.outer(p, p)) / np.outer(f, f)
    np.testing.assert_allclose(qclt_cov(Laplace(0, 1), p), expect, rtol=1e-12)


def test_qclt_laplace_monte_carlo():
    # n Cov of sample quantiles over 20,000 replicates at n = 2,000
    n, reps, p = 2000, 20_000, np.array([0.25, 0.75])
    rng = np.random.default_rng(2024)
    est = np.empty((reps, 2))
    for start in range(0, reps, 2000):
        x = rng.laplace(size=(2000, n))
        est[start : start + 2000] = np.quantile(x, p, axis=1).T
    emp = n * np.cov(est, rowvar=False)
    np.testing.assert_allclose(emp, qclt_cov(Laplace(0, 1), p), rtol=0.05)


def test_cholesky_jitter_on_singular():
    m = np.ones((3, 3))
    L = cholesky(m)
    np.testing.assert_allclose(L @ L.T, m, atol=1e-8)


def test_quantile_csv_round_trip(tmp_path):
    qs = QuantileSet.from_arrays([0.1, 0.5, 0.9], [-1.25, 0.0, 1.5])
    path = tmp_path / "q.csv"
    write_quantile_csv(qs, path)
    back = read_quantile_csv(path)
    np.testing.assert_array_equal(back.values, qs.values)
    np.testing.assert_array_equal(back.probs, qs.probs)


def test_quantile_csv_fixture(fixtures_dir):
    qs = read_quantile_csv(fixtures_dir / "normal_quantiles.csv")
    np.testing.assert_allclose(qs.values, stats.norm.ppf(qs.probs), atol=1e-15)


@pytest.mark.parametrize("body", ["p,q\n0.1,a\n", "0.1,1,2\n", "", "p,q\n"])
def test_quantile_csv_errors(tmp_path, body):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(FormatError):
        read_quantile_csv(path)
