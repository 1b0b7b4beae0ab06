"""A small coverage study: normal samples, several quantile-matching methods.

Equivalent to ``quantmatch simulate-study fixtures/study_small.ini``, but
driven from Python so the aggregate table can be inspected directly.

    python demos/run_normal_study.py [replicates]
"""

from __future__ import annotations

import sys

from quantmatch import McmcConfig, Normal
from quantmatch.harness import StudySpec, default_levels, run_study


def main(replicates: int = 10) -> None:
    spec = StudySpec(
        truth=Normal(4, 3.5),
        family="Normal",
        sample_sizes=(150, 1000),
        levels=default_levels(23),
        replicates=replicates,
        methods=("QGP", "QGP-n", "ORD-n", "IND", "SPL", "KDE"),
        seed=1,
        metrics=("coverage", "uwd1"),
        mcmc=McmcConfig(5_000, 1_500),
        predictive_draws=5_000,
    )
    res = run_study(spec, progress=lambda msg: print(msg, file=sys.stderr))
    for row in res.aggregate():
        if row["metric"] != "failures":
            print(f"{row['method']:>6} n={row['n']:<5} {row['metric']:<16} {row['mean']:.3f} +- {row['se']:.3f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 10)
