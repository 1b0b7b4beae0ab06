"""Quantile matching: fit continuous distributions to sets of quantiles.

The Bayesian fits model sample quantiles as a Gaussian process whose
covariance comes from the quantile central limit theorem; order-statistic
and independent-error likelihoods, least squares, a monotone spline and a
kernel density serve as alternatives. Distances, forecast scores, a hub
forecast reader and a simulation-study harness complete the package.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .distributions import (
    Distribution,
    Exponential,
    ExtremeValue,
    GeneralizedLambda,
    Laplace,
    LocationScale,
    Logistic,
    Metalog3,
    Normal,
    NormalMixture,
    TukeyLambda,
    format_distribution,
    parse_distribution,
)
from .empirical import ProbabilityGrid, QuantileSet, qclt_cov, read_quantile_csv, sample_quantiles
from .errors import (
    ConvergenceError,
    DomainError,
    FormatError,
    NumericError,
    PreconditionError,
    QuantMatchError,
    StudyError,
    UnusableForecastError,
)
from .inference import McmcConfig, PosteriorSamples, credible_interval, fit_least_squares, fit_mcmc, posterior_predictive
from .likelihoods import ModelKind, ModelSpec, PriorSpec
from .metrics import crps_sample, interval_score, kld_mc, total_variation, uwd1, wasserstein_p, wis
from .nonparametric import kde_fit, spl_fit

__all__ = [
    "ConvergenceError",
    "Distribution",
    "DomainError",
    "Exponential",
    "ExtremeValue",
    "FormatError",
    "GeneralizedLambda",
    "Laplace",
    "LocationScale",
    "Logistic",
    "McmcConfig",
    "Metalog3",
    "ModelKind",
    "ModelSpec",
    "Normal",
    "NormalMixture",
    "NumericError",
    "PosteriorSamples",
    "PreconditionError",
    "PriorSpec",
    "ProbabilityGrid",
    "QuantMatchError",
    "QuantileSet",
    "StudyError",
    "TukeyLambda",
    "UnusableForecastError",
    "credible_interval",
    "crps_sample",
    "fit_least_squares",
    "fit_mcmc",
    "format_distribution",
    "interval_score",
    "kde_fit",
    "kld_mc",
    "parse_distribution",
    "posterior_predictive",
    "qclt_cov",
    "read_quantile_csv",
    "sample_quantiles",
    "spl_fit",
    "total_variation",
    "uwd1",
    "wasserstein_p",
    "wis",
]
