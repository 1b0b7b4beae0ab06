from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special, stats

from quantmatch.distributions import Exponential, Laplace, Logistic, Normal, NormalMixture, TukeyLambda
from quantmatch.empirical import QuantileSet, brownian_bridge_cov, qclt_cov
from quantmatch.errors import DomainError, FormatError, PreconditionError
from quantmatch.likelihoods import (
    DirichletPrior,
    HalfNormalPrior,
    ModelKind,
    ModelSpec,
    NormalPrior,
    PriorSpec,
    log_prior,
    loglik_ind,
    loglik_ord,
    loglik_qgp_normal,
    loglik_qgp_pit,
    loglik_qgp_qf,
    order_indices,
    parse_prior,
    psi_matrix,
)

GRID = np.array([0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95])


def dense_mvn(values, mean, cov):
    return stats.multivariate_normal(mean, cov).logpdf(values)


def noisy_normal_qs(seed=0, mu=1.0, sigma=2.0):
    rng = np.random.default_rng(seed)
    x = np.sort(stats.norm.ppf(GRID, mu, sigma) + 0.05 * rng.standard_normal(GRID.size))
    return QuantileSet.from_arrays(GRID, x)


# -- Psi --------------------------------------------------------------------


def test_psi_examples():
    assert psi_matrix([0.5])[0, 0] == pytest.approx(math.pi / 2, rel=1e-14)
    # 2 pi 0.0625 / exp(-z^2), z = Phi^-1(0.75)
    assert psi_matrix([0.25, 0.75])[0, 1] == pytest.approx(0.6189224897034231, rel=1e-12)


@given(st.lists(st.floats(0.001, 0.999), min_size=1, max_size=30, unique=True).map(sorted))
def test_psi_is_standard_normal_qclt(g):
    if np.any(np.diff(g) < 1e-9):
        return
    np.testing.assert_allclose(psi_matrix(g), qclt_cov(Normal(0, 1), g), rtol=1e-12, atol=0)


# -- normal QGP -------------------------------------------------------------


def test_qgp_normal_zero_residual_k1():
    qs = QuantileSet.from_arrays([0.5], [3.0])
    expect = -0.5 * math.log(2 * math.pi * 4.0 * (math.pi / 2) / 100.0)
    assert loglik_qgp_normal(3.0, 2.0, 100.0, qs) == pytest.approx(expect, rel=1e-13)


def test_qgp_normal_against_dense_mvn():
    qs = noisy_normal_qs()
    points = [(1.0, 2.0, 500.0), (1.3, 1.7, 80.0)]
    got = [loglik_qgp_normal(m, s, n, qs) for m, s, n in points]
    ref = [dense_mvn(qs.values, m + s * stats.norm.ppf(GRID), s * s * psi_matrix(GRID) / n) for m, s, n in points]
    assert got[0] - got[1] == pytest.approx(ref[0] - ref[1], abs=1e-9)
    np.testing.assert_allclose(got, ref, rtol=1e-10)


def test_qgp_normal_preconditions():
    qs = noisy_normal_qs()
    with pytest.raises(PreconditionError):
        loglik_qgp_normal(0.0, 0.0, 10.0, qs)
    with pytest.raises(PreconditionError):
        loglik_qgp_normal(0.0, 1.0, -1.0, qs)


@given(a=st.floats(0.1, 10), b=st.floats(-10, 10), mu=st.floats(-2, 2), sigma=st.floats(0.5, 3), n=st.floats(10, 5000))
def test_qgp_normal_scaling(a, b, mu, sigma, n):
    qs = noisy_normal_qs()
    moved = QuantileSet.from_arrays(GRID, a * qs.values + b)
    lhs = loglik_qgp_normal(mu, sigma, n, qs)
    rhs = loglik_qgp_normal(a * mu + b, a * sigma, n, moved) + GRID.size * math.log(a)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-8)


def test_qgp_normal_decreases_away_from_truth():
    exact = stats.norm.ppf(GRID, 1.0, 2.0)
    lls = [loglik_qgp_normal(1.0, 2.0, 300.0, QuantileSet.from_arrays(GRID, exact + t)) for t in (0, 0.01, 0.05, 0.2)]
    assert np.all(np.diff(lls) < 0)


# -- QF QGP -------------------------------------------------------------------


@given(mu=st.floats(-3, 3), sigma=st.floats(0.2, 5), n=st.floats(5, 1e4))
def test_qgp_qf_normal_equals_normal_qgp(mu, sigma, n):
    qs = noisy_normal_qs()
    assert loglik_qgp_qf(Normal(mu, sigma), n, qs) == pytest.approx(loglik_qgp_normal(mu, sigma, n, qs), rel=1e-10, abs=1e-10)


def test_qgp_qf_tukey_zero_residual():
    tl = TukeyLambda(0.14)
    qs = QuantileSet.from_arrays(GRID, tl.quantile(GRID))
    cov = qclt_cov(tl, GRID) / 1000.0
    sign, logdet = np.linalg.slogdet(cov)
    expect = -0.5 * (GRID.size * math.log(2 * math.pi) + logdet)
    assert loglik_qgp_qf(tl, 1000.0, qs) == pytest.approx(expect, rel=1e-10)


def test_qgp_qf_tukey_against_dense_mvn():
    tl0 = TukeyLambda(0.14)
    rng = np.random.default_rng(1)
    qs = QuantileSet.from_arrays(GRID, np.sort(tl0.quantile(GRID) + 0.02 * rng.standard_normal(GRID.size)))
    a, b = TukeyLambda(0.14), TukeyLambda(0.3)
    got = loglik_qgp_qf(a, 400.0, qs) - loglik_qgp_qf(b, 400.0, qs)
    ref = dense_mvn(qs.values, a.quantile(GRID), qclt_cov(a, GRID) / 400.0) - dense_mvn(
        qs.values, b.quantile(GRID), qclt_cov(b, GRID) / 400.0
    )
    assert got == pytest.approx(ref, abs=1e-9)


def test_qgp_qf_never_calls_cdf(monkeypatch):
    def boom(self, x):
        raise AssertionError("CDF evaluated")

    monkeypatch.setattr(TukeyLambda, "_cdf", boom)
    tl = TukeyLambda(0.2)
    loglik_qgp_qf(tl, 100.0, QuantileSet.from_arrays(GRID, tl.quantile(GRID)))


# -- PIT QGP ------------------------------------------------------------------


def test_qgp_pit_zero_residual_k1():
    qs = QuantileSet.from_arrays([0.5], [0.0])
    assert loglik_qgp_pit(Laplace(0, 1), 50.0, qs) == pytest.approx(-0.5 * math.log(2 * math.pi * 0.25 / 50.0), rel=1e-13)


def test_qgp_pit_against_dense_mvn():
    qs = noisy_normal_qs()
    d = Logistic(1.0, 1.1)
    ref = dense_mvn(d.cdf(qs.values), GRID, brownian_bridge_cov(GRID) / 300.0)
    assert loglik_qgp_pit(d, 300.0, qs) == pytest.approx(ref, rel=1e-10)


def test_qgp_pit_local_max_at_truth():
    truth = Normal(1.0, 2.0)
    qs = QuantileSet.from_arrays(GRID, truth.quantile(GRID))
    best = loglik_qgp_pit(truth, 1000.0, qs)
    for dm in (-0.05, 0.0, 0.05):
        for ds in (-0.05, 0.0, 0.05):
            if dm == ds == 0.0:
                continue
            assert loglik_qgp_pit(Normal(1.0 + dm, 2.0 + ds), 1000.0, qs) < best


def test_qgp_pit_label_symmetry():
    qs = noisy_normal_qs()
    a = NormalMixture([0.3, 0.7], [0.0, 2.0], [1.0, 1.5])
    b = NormalMixture([0.7, 0.3], [2.0, 0.0], [1.5, 1.0])
    assert loglik_qgp_pit(a, 200.0, qs) == pytest.approx(loglik_qgp_pit(b, 200.0, qs), rel=1e-14)


def test_qgp_pit_support_error():
    with pytest.raises(DomainError):
        loglik_qgp_pit(Exponential(1.0), 10.0, QuantileSet.from_arrays([0.2, 0.5], [-0.1, 0.5]))


# -- IND ------------------------------------------------------------------


def test_ind_zero_residuals():
    d = Laplace(0.5, 2.0)
    qs = QuantileSet.from_arrays(GRID, d.quantile(GRID))
    sr = 0.03
    assert loglik_ind(d, sr, qs) == pytest.approx(-GRID.size / 2 * math.log(2 * math.pi * sr * sr), rel=1e-12)


def test_ind_scalar_oracle():
    qs = noisy_normal_qs()
    d = Normal(0.9, 2.1)
    u = [stats.norm.cdf(v, 0.9, 2.1) for v in qs.values]
    expect = sum(stats.norm.logpdf(ui, pi, 0.05) for ui, pi in zip(u, GRID))
    assert loglik_ind(d, 0.05, qs) == pytest.approx(expect, abs=1e-12)


def test_ind_is_pit_with_identity_covariance():
    qs = noisy_normal_qs()
    d = Normal(0.9, 2.1)
    ref = dense_mvn(d.cdf(qs.values), GRID, 0.04**2 * np.eye(GRID.size))
    assert loglik_ind(d, 0.04, qs) == pytest.approx(ref, rel=1e-12)


# -- ORD ----------------------------------------------------------------------


def ord_oracle(dist, n, probs, y):
    j = [int(math.floor(p * (n - 1) + 0.5)) + 1 for p in probs]
    jj = [0] + j + [n + 1]
    F = [0.0] + [float(dist.cdf(v)) for v in y] + [1.0]
    total = math.lgamma(n + 1)
    for i in range(len(jj) - 1):
        g = jj[i + 1] - jj[i] - 1
        total += g * math.log(F[i + 1] - F[i]) - math.lgamma(g + 1)
    return total + sum(math.log(dist.pdf(v)) for v in y)


def test_ord_median_of_three():
    qs = QuantileSet.from_arrays([0.5], [0.0])
    assert loglik_ord(Normal(0, 1), 3, qs) == pytest.approx(-0.5134734250965083, abs=1e-12)


def test_ord_full_sample():
    y = np.array([-1.0, -0.2, 0.3, 1.4])
    qs = QuantileSet.from_arrays([0.1, 0.4, 0.6, 0.9], y)
    np.testing.assert_array_equal(order_indices(qs.probs, 4), [1, 2, 3, 4])
    expect = math.log(24) + np.sum(stats.norm.logpdf(y))
    assert loglik_ord(Normal(0, 1), 4, qs) == pytest.approx(expect, rel=1e-12)


def test_ord_min_and_max_of_two():
    y = np.array([-0.3, 0.8])
    qs = QuantileSet.from_arrays([1 / 3, 2 / 3], y)
    expect = math.log(2) + np.sum(stats.laplace.logpdf(y))
    assert loglik_ord(Laplace(0, 1), 2, qs) == pytest.approx(expect, rel=1e-12)


@pytest.mark.parametrize("n", [30, 151, 1000])
def test_ord_matches_oracle(n):
    qs = noisy_normal_qs()
    d = Logistic(1.0, 1.2)
    assert loglik_ord(d, n, qs) == pytest.approx(ord_oracle(d, n, GRID, qs.values), rel=1e-11)


def test_ord_rejects_nonincreasing_and_ties():
    with pytest.raises(DomainError):
        loglik_ord(Normal(0, 1), 10, QuantileSet.from_arrays([0.2, 0.4], [0.1, 0.1]))
    with pytest.raises(PreconditionError):
        loglik_ord(Normal(0, 1), 3, QuantileSet.from_arrays([0.45, 0.55], [0.0, 0.1]))


# -- priors -------------------------------------------------------------------


def test_prior_examples():
    assert NormalPrior(5, 7).logpdf(5.0) == pytest.approx(-math.log(7 * math.sqrt(2 * math.pi)), rel=1e-14)
    assert HalfNormalPrior(6).logpdf(-1.0) == -math.inf
    assert HalfNormalPrior(6).logpdf(1.0) == pytest.approx(math.log(2) + stats.norm.logpdf(1.0, 0, 6), rel=1e-14)
    w = np.array([0.1, 0.2, 0.3, 0.4])
    assert DirichletPrior((1, 1, 1, 1)).logpdf(w) == pytest.approx(math.log(6), rel=1e-14)


def test_dirichlet_against_scipy():
    w = np.array([0.2, 0.5, 0.3])
    assert DirichletPrior((2.0, 1.5, 3.0)).logpdf(w) == pytest.approx(stats.dirichlet([2.0, 1.5, 3.0]).logpdf(w), rel=1e-12)
    assert DirichletPrior((1.0, 1.0, 1.0)).logpdf(np.array([0.5, 0.6, -0.1])) == -math.inf


def test_log_prior_groups():
    spec = ModelSpec(ModelKind.QGP_PIT, "NormalMixture", n_known=False, components=2)
    theta = {"mu[1]": 0.0, "mu[2]": 1.0, "sigma[1]": 1.0, "sigma[2]": 2.0, "w": np.array([0.4, 0.6]), "n": 100.0}
    expect = (
        stats.norm.logpdf(0, 5, 7)
        + stats.norm.logpdf(1, 5, 7)
        + math.log(2) * 3
        + stats.norm.logpdf(1, 0, 6)
        + stats.norm.logpdf(2, 0, 6)
        + stats.norm.logpdf(100, 0, 3000)
        + math.log(1.0)  # Dirichlet(1, 1) is uniform: log Gamma(2) = 0
    )
    assert log_prior(theta, spec.priors) == pytest.approx(expect, rel=1e-12)


def test_parse_prior():
    assert parse_prior("normal(5, 7)") == NormalPrior(5.0, 7.0)
    assert parse_prior("half_normal(3)") == HalfNormalPrior(3.0)
    assert parse_prior("Dirichlet(1,1)") == DirichletPrior((1.0, 1.0))
    for bad in ("normal(1)", "gamma(1,2)", "normal(a,b)", "normal"):
        with pytest.raises(FormatError):
            parse_prior(bad)


@pytest.mark.parametrize("make", [lambda: NormalPrior(0, 0), lambda: HalfNormalPrior(-1), lambda: DirichletPrior((1.0, 0.0))])
def test_prior_invariants(make):
    with pytest.raises(PreconditionError):
        make()


# -- model spec -----------------------------------------------------------


def test_model_spec_invariants():
    with pytest.raises(PreconditionError):
        ModelSpec(ModelKind.QGP_QF, "NormalMixture", components=2)
    with pytest.raises(PreconditionError):
        ModelSpec(ModelKind.QGP_PIT, "Normal", components=2)
    with pytest.raises(PreconditionError):
        ModelSpec(ModelKind.QGP_PIT, "Gamma")
    # quantile-defined families get a numeric CDF, so ORD accepts them
    ModelSpec(ModelKind.ORD, "TukeyLambda")
    with pytest.raises(PreconditionError):
        ModelSpec(ModelKind.QGP_NORMAL, "Laplace")
    ModelSpec(ModelKind.QGP_QF, "TukeyLambda")


def test_model_spec_parameters():
    m = ModelSpec(ModelKind.IND, "Normal")
    assert [p.name for p in m.parameters()] == ["mu", "sigma", "nu"]
    m = ModelSpec(ModelKind.QGP_PIT, "NormalMixture", n_known=False, components=3)
    assert [p.name for p in m.parameters()] == ["mu[1]", "mu[2]", "mu[3]", "sigma[1]", "sigma[2]", "sigma[3]", "w", "n"]
