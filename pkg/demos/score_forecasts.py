"""Score forecast-hub quantile submissions against observed counts.

Reads the bundled three-forecast fixture, reports the weighted interval
score of each forecast on the log(count + 1) scale, then fits the spline
and a two-component QGP mixture to each forecast and compares their CRPS
and how faithfully they reproduce the submitted quantiles.

    python demos/score_forecasts.py [hub.csv truth.csv]
"""

from __future__ import annotations

import math
import sys
import warnings
from pathlib import Path

import numpy as np

from quantmatch import McmcConfig, ModelKind, ModelSpec, crps_sample, fit_mcmc, posterior_predictive, spl_fit, wis
from quantmatch.empirical import QuantileSet
from quantmatch.harness import fidelity_check
from quantmatch.hub_io import parse_hub_csv, preprocess, read_truth_csv

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def main(hub: Path, truth_path: Path) -> None:
    warnings.simplefilter("ignore", RuntimeWarning)
    parsed = parse_hub_csv(hub)
    truth = read_truth_csv(truth_path)
    for rej in parsed.rejects:
        print(f"rejected line {rej.line}: {rej.reason}")
    model = ModelSpec(ModelKind.QGP_PIT, "NormalMixture", n_known=False, components=2)
    print(f"{'location':>8} {'truth':>6} {'WIS':>7} {'CRPS spl':>9} {'CRPS qgp':>9} {'MAE spl':>8} {'MAE qgp':>8}")
    for f in parsed.forecasts:
        y = truth.get(f.location, f.target_end_date)
        if y is None:
            continue
        ly = math.log1p(y)
        score = wis(QuantileSet.from_arrays(f.probs, np.log1p(f.values)), ly)
        qs = preprocess(f)
        spl = spl_fit(qs)
        post = fit_mcmc(model, qs, McmcConfig(10_000, 3_000, seed=1))
        crps_spl = crps_sample(spl.sample(10_000, np.random.default_rng(1)), ly)
        crps_qgp = crps_sample(posterior_predictive(post, 10_000, 1), ly)
        mae_spl = fidelity_check(spl, qs)[0]
        mae_qgp = fidelity_check(post, qs)[0]
        print(f"{f.location:>8} {y:>6} {score:7.4f} {crps_spl:9.4f} {crps_qgp:9.4f} {mae_spl:8.4f} {mae_qgp:8.4f}")


if __name__ == "__main__":
    args = [Path(a) for a in sys.argv[1:3]]
    main(*(args or [FIXTURES / "hub_three.csv", FIXTURES / "truth.csv"]))
