"""Reconstruct a skewed distribution from 23 sample quantiles with every method.

Draws n = 1000 observations from an extreme-value distribution, keeps only
their 23 forecast-hub quantiles, and compares the fits of the QGP mixture
model, least squares, the monotone spline and the KDE against the truth.

    python demos/compare_methods.py
"""

from __future__ import annotations

import numpy as np

from quantmatch import (
    ExtremeValue,
    McmcConfig,
    ModelKind,
    ModelSpec,
    credible_interval,
    fit_least_squares,
    fit_mcmc,
    kde_fit,
    posterior_predictive,
    sample_quantiles,
    spl_fit,
    total_variation,
)
from quantmatch.hub_io import CANONICAL_LEVELS
from quantmatch.metrics import uwd1_cdf, uwd1_predictive


def main(seed: int = 1) -> None:
    truth = ExtremeValue(0, 1)
    rng = np.random.default_rng(seed)
    qs = sample_quantiles(truth.sample(1000, rng), CANONICAL_LEVELS)

    model = ModelSpec(ModelKind.QGP_PIT, "NormalMixture", n_known=False, components=3)
    post = fit_mcmc(model, qs, McmcConfig(20_000, 5_000, seed=seed))
    lo, hi = credible_interval(post, "n", 0.9)
    print(f"QGP mixture: acceptance {post.acceptance_rate:.2f}, 90% interval for n [{lo:.0f}, {hi:.0f}]")

    fits = {
        "QGP (plug-in)": post.point_distribution(),
        "least squares": fit_least_squares("NormalMixture", qs, components=2).distribution(2),
        "spline": spl_fit(qs),
        "KDE": kde_fit(qs),
    }
    print(f"{'method':>14}  {'UWD1':>7}  {'TV':>7}")
    for name, fit in fits.items():
        print(f"{name:>14}  {uwd1_cdf(fit, truth):7.4f}  {total_variation(fit, truth):7.4f}")
    draws = posterior_predictive(post, 20_000, seed)
    print(f"{'QGP (predictive)':>14}  {uwd1_predictive(draws, truth):7.4f}")


if __name__ == "__main__":
    main()
