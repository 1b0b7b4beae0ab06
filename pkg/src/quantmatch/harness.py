"""Simulation studies: simulate sample quantiles, fit every method, score the fits.

A study draws ``replicates`` samples of each size ``n`` from a known
distribution, reduces each sample to its quantiles on a probability grid,
fits the requested methods and records parameter coverage, distances to
the truth and fit times. All chains of one (method, n) cell run as one
batch; replicate ``r`` uses random streams derived only from
``(seed, n, r)``, so it can be reproduced in isolation.

Method names
------------
``QGP`` / ``QGP-n``
    PIT quantile Gaussian process, n estimated / known.
``QGP-QF`` / ``QGP-QF-n``
    Quantile-function QGP (no CDF evaluations).
``QGP-NORMAL`` / ``QGP-NORMAL-n``
    Normal QGP with the closed-form covariance.
``ORD`` / ``ORD-n``
    Order-statistics likelihood.
``IND``
    Independent PIT errors.
``SPL`` / ``KDE``
    Nonparametric baselines.
"""

from __future__ import annotations

import csv
import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import (
    _int,
    mcmc_from_config,
    parse_bool,
    parse_levels,
    parse_list,
    parse_truth,
    priors_from_config,
    read_config,
)
from .distributions import (
    LOCATION_SCALE_FAMILIES,
    Distribution,
    Exponential,
    GeneralizedLambda,
    LocationScale,
    Metalog3,
    TukeyLambda,
    format_distribution,
)
from .empirical import ProbabilityGrid, QuantileSet, _sample_quantiles
from .errors import FormatError, PreconditionError, QuantMatchError, StudyError
from .hub_io import CANONICAL_LEVELS
from .inference import McmcConfig, PosteriorSamples, credible_interval, fit_mcmc_batch, posterior_predictive
from .likelihoods import ModelKind, ModelSpec, PriorSpec
from .metrics import kld_mc, total_variation, uwd1_cdf, uwd1_predictive, wasserstein_p
from .nonparametric import TailFamily, kde_fit, spl_fit

__all__ = [
    "METHODS",
    "StudySpec",
    "StudyResult",
    "method_model",
    "default_levels",
    "simulate_quantiles",
    "truth_parameters",
    "run_study",
    "run_components_study",
    "fidelity_check",
    "study_from_config",
]

# method name -> (likelihood, n known)
METHODS: dict[str, tuple[ModelKind | None, bool]] = {
    "QGP": (ModelKind.QGP_PIT, False),
    "QGP-n": (ModelKind.QGP_PIT, True),
    "QGP-QF": (ModelKind.QGP_QF, False),
    "QGP-QF-n": (ModelKind.QGP_QF, True),
    "QGP-NORMAL": (ModelKind.QGP_NORMAL, False),
    "QGP-NORMAL-n": (ModelKind.QGP_NORMAL, True),
    "ORD": (ModelKind.ORD, False),
    "ORD-n": (ModelKind.ORD, True),
    "IND": (ModelKind.IND, True),
    "SPL": (None, False),
    "KDE": (None, False),
}
METRICS = ("coverage", "uwd1", "tv", "kld", "wd1")
MAX_FAILURE_FRACTION = 0.10


def default_levels(K: int) -> np.ndarray:
    """The 23 hub levels for ``K = 23``, otherwise ``k / (K + 1)``."""
    if K < 1:
        raise PreconditionError("K must be at least 1")
    if K == 23:
        return CANONICAL_LEVELS.copy()
    return np.arange(1, K + 1) / (K + 1)


def method_model(method: str, family: str, components: int = 1, priors: PriorSpec | None = None) -> ModelSpec | None:
    """The model behind a Bayesian method name; ``None`` for SPL and KDE."""
    base = method.split("[", 1)[0]
    if base not in METHODS:
        raise PreconditionError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    kind, known = METHODS[base]
    if kind is None:
        return None
    return ModelSpec(kind, family, n_known=known, components=components, priors=priors or PriorSpec())


@dataclass(frozen=True)
class StudySpec:
    """A simulation study.

    Parameters
    ----------
    truth
        Distribution the samples are drawn from.
    family
        Distribution family fitted by the Bayesian methods.
    levels
        Probability grid of the simulated quantiles.
    metrics
        Any of ``coverage``, ``uwd1``, ``tv``, ``kld``, ``wd1``.
    level
        Credible level of the coverage intervals.
    predictive_draws, predictive_thin
        Posterior predictive sample size for UWD1 and the thinning of the
        posterior draws it resamples from.
    kld_draws
        Monte-Carlo sample size of the KLD estimate.
    isolated_timing
        Fit replicates one at a time so each gets its own wall-clock time
        (slower); otherwise a batch's time is shared equally by its chains.
    """

    truth: Distribution
    family: str
    sample_sizes: tuple[int, ...]
    levels: np.ndarray
    replicates: int
    methods: tuple[str, ...]
    seed: int = 0
    metrics: tuple[str, ...] = ("coverage",)
    mcmc: McmcConfig = field(default_factory=lambda: McmcConfig(20_000, 5_000))
    components: int = 1
    priors: PriorSpec = field(default_factory=PriorSpec)
    level: float = 0.9
    predictive_draws: int = 50_000
    predictive_thin: int = 10
    kld_draws: int = 100_000
    spl_tails: TailFamily = TailFamily.NORMAL
    workers: int = 1
    isolated_timing: bool = False
    name: str = "study"

    def __post_init__(self):
        if self.replicates < 1:
            raise PreconditionError("replicate count must be at least 1")
        if not self.methods:
            raise PreconditionError("a study needs at least one method")
        if not self.sample_sizes or min(self.sample_sizes) < 2:
            raise PreconditionError("sample sizes must be at least 2")
        for m in self.methods:
            method_model(m, self.family, self.components)
        bad = [m for m in self.metrics if m not in METRICS]
        if bad:
            raise PreconditionError(f"unknown metric(s) {bad}; choose from {', '.join(METRICS)}")
        if not 0 < self.level < 1:
            raise PreconditionError("credible level must lie in (0, 1)")
        object.__setattr__(self, "levels", ProbabilityGrid(self.levels).probs)
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "metrics", tuple(self.metrics))

    @property
    def grid(self) -> ProbabilityGrid:
        return ProbabilityGrid(self.levels)

    @property
    def K(self) -> int:
        return self.levels.size


@dataclass
class StudyResult:
    """Per-replicate records and their aggregates.

    ``records`` has one row per (method, n, replicate); ``parameters`` one
    row per fitted parameter of a Bayesian fit. ``aggregate`` holds means
    and standard errors of every metric; fit times are kept out of it (in
    ``timing``) so the aggregate is reproducible byte for byte.
    """

    spec: StudySpec
    records: list[dict] = field(default_factory=list)
    parameters: list[dict] = field(default_factory=list)

    def aggregate(self) -> list[dict]:
        rows = []
        cells: dict[tuple, list[dict]] = {}
        for r in self.records:
            cells.setdefault((r["method"], r["n"]), []).append(r)
        cov_cells: dict[tuple, list[dict]] = {}
        for p in self.parameters:
            if p["covered"] != "":
                cov_cells.setdefault((p["method"], p["n"], p["parameter"]), []).append(p)
        for (method, n), recs in cells.items():
            ok = [r for r in recs if r["status"] == "ok"]
            rows.append(_agg_row(method, n, self.spec.K, "failures", [float(r["status"] != "ok") for r in recs]))
            for metric in ("uwd1", "tv", "kld", "wd1"):
                vals = [r[metric] for r in ok if metric in r and r[metric] != ""]
                if vals:
                    rows.append(_agg_row(method, n, self.spec.K, metric, vals))
            for (m2, n2, param), ps in cov_cells.items():
                if (m2, n2) == (method, n):
                    rows.append(_agg_row(method, n, self.spec.K, f"coverage[{param}]", [float(p["covered"]) for p in ps]))
        return rows

    def timing(self) -> list[dict]:
        rows = []
        cells: dict[tuple, list[float]] = {}
        for r in self.records:
            if r["status"] == "ok":
                cells.setdefault((r["method"], r["n"]), []).append(r["fit_seconds"])
        for (method, n), t in cells.items():
            t = np.asarray(t)
            rows.append(
                dict(method=method, n=n, K=self.spec.K, count=t.size, mean_seconds=float(t.mean()),
                     median_seconds=float(np.median(t)), max_seconds=float(t.max()))
            )
        return rows

    def table(self, metric: str) -> dict[tuple[str, int], tuple[float, float]]:
        """``(method, n) -> (mean, se)`` for one aggregate metric."""
        return {(r["method"], r["n"]): (r["mean"], r["se"]) for r in self.aggregate() if r["metric"] == metric}

    def plot_data(self) -> list[dict]:
        """Long-format rows for coverage and distance figures."""
        out = []
        for r in self.aggregate():
            if r["metric"] == "failures":
                continue
            panel = "coverage" if r["metric"].startswith("coverage") else "distance"
            out.append(dict(panel=panel, metric=r["metric"], method=r["method"], n=r["n"], K=r["K"], value=r["mean"], se=r["se"]))
        return out

    def write(self, outdir: str | Path) -> dict[str, Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        paths = {}
        for name, rows in (
            ("replicates", self.records),
            ("parameters", self.parameters),
            ("aggregate", self.aggregate()),
            ("timing", self.timing()),
            ("plot_data", self.plot_data()),
        ):
            path = outdir / f"{name}.csv"
            _write_rows(path, rows)
            paths[name] = path
        return paths


def _agg_row(method, n, K, metric, vals):
    v = np.asarray(vals, dtype=float)
    finite = v[np.isfinite(v)]
    mean = float(finite.mean()) if finite.size else math.nan
    se = float(finite.std(ddof=1) / math.sqrt(finite.size)) if finite.size > 1 else math.nan
    return dict(method=method, n=n, K=K, metric=metric, mean=mean, se=se, count=int(v.size), nonfinite=int(v.size - finite.size))


def _fmt_cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    return str(v)


def _write_rows(path: Path, rows: list[dict]) -> None:
    cols: list[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt_cell(r.get(c, "")) for c in cols])


# ---------------------------------------------------------------------------
# simulation


def _stream(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))


def _method_id(method: str) -> int:
    return zlib.crc32(method.encode())


def simulate_quantiles(truth: Distribution, n: int, grid: ProbabilityGrid, replicates: int, seed: int, qtype: int = 7):
    """Sample quantiles of ``replicates`` independent samples of size ``n``.

    Replicate ``r`` draws from the stream ``SeedSequence(seed, spawn_key=(n, r, 0))``.
    """
    out = np.empty((replicates, len(grid)))
    for r in range(replicates):
        rng = np.random.default_rng(_stream(seed, n, r, 0))
        out[r] = _sample_quantiles(truth.sample(n, rng), grid.probs, qtype)
    return out


def truth_parameters(truth: Distribution, model: ModelSpec, n: int | None = None) -> dict[str, float]:
    """True values of the model parameters that have one.

    Mixture components are not identified (label switching), so a mixture
    model gets no component truths; ``n`` is included when the model
    estimates it.
    """
    out: dict[str, float] = {}
    fam = model.family
    if fam in LOCATION_SCALE_FAMILIES and truth.family == fam:
        out = {"mu": float(truth.mu), "sigma": float(truth.sigma)}
    elif fam == "Exponential" and isinstance(truth, Exponential):
        out = {"rate": float(truth.rate)}
    elif fam == "TukeyLambda":
        if isinstance(truth, TukeyLambda):
            out = {"mu": 0.0, "sigma": 1.0, "lam": float(truth.lam)}
        elif isinstance(truth, LocationScale) and isinstance(truth.base, TukeyLambda):
            out = {"mu": float(truth.loc), "sigma": float(truth.scale), "lam": float(truth.base.lam)}
    elif fam == "GeneralizedLambda" and isinstance(truth, GeneralizedLambda):
        out = {k: float(getattr(truth, k)) for k in ("l1", "l2", "l3", "l4")}
    elif fam == "Metalog3" and isinstance(truth, Metalog3):
        out = {k: float(getattr(truth, k)) for k in ("a1", "a2", "a3")}
    if model.estimates_n and n is not None:
        out["n"] = float(n)
    return out


def _thinned(samples: PosteriorSamples, thin: int) -> PosteriorSamples:
    if thin <= 1 or len(samples) <= thin:
        return samples
    return replace(samples, draws=samples.draws[thin - 1 :: thin])


def _bayes_cell(spec: StudySpec, method: str, n: int, values: np.ndarray, reps: list[int]):
    """Fit one (method, n) batch; returns per-replicate (result, seconds)."""
    model = method_model(method, spec.family, spec.components, spec.priors)
    seeds = [_stream(spec.seed, n, r, 1, _method_id(method)) for r in reps]
    if spec.isolated_timing:
        out = []
        for i, r in enumerate(reps):
            t0 = time.perf_counter()
            res = fit_mcmc_batch(model, values[i : i + 1], spec.grid, spec.mcmc, sample_sizes=n, seeds=[seeds[i]])[0]
            out.append((res, time.perf_counter() - t0))
        return out
    t0 = time.perf_counter()
    res = fit_mcmc_batch(model, values, spec.grid, spec.mcmc, sample_sizes=n, seeds=seeds)
    dt = (time.perf_counter() - t0) / max(len(reps), 1)
    return [(r, dt) for r in res]


def _bayes_cell_task(args):
    spec, method, n, values, reps = args
    try:
        return _bayes_cell(spec, method, n, values, reps)
    except QuantMatchError as exc:
        return [(exc, 0.0) for _ in reps]


def _run_bayes(spec: StudySpec, method: str, n: int, values: np.ndarray):
    reps = list(range(spec.replicates))
    if spec.workers <= 1 or spec.isolated_timing:
        try:
            return _bayes_cell(spec, method, n, values, reps)
        except QuantMatchError as exc:
            return [(exc, 0.0) for _ in reps]
    chunks = [c for c in np.array_split(np.arange(spec.replicates), spec.workers) if c.size]
    tasks = [(spec, method, n, values[c], [int(r) for r in c]) for c in chunks]
    out = []
    with ProcessPoolExecutor(max_workers=spec.workers) as pool:
        for part in pool.map(_bayes_cell_task, tasks):
            out.extend(part)
    return out


def _score_bayes(spec, method, n, r, samples: PosteriorSamples, model: ModelSpec, rec: dict, params: list):
    truths = truth_parameters(spec.truth, model, n)
    for name in samples.names:
        lo, hi = credible_interval(samples, name, spec.level)
        t = truths.get(name)
        params.append(
            dict(
                method=method, n=n, K=spec.K, replicate=r, parameter=name, mean=float(samples.column(name).mean()),
                low=lo, high=hi, truth=t if t is not None else "", covered="" if t is None else bool(lo <= t <= hi),
            )
        )
    rec["acceptance_rate"] = samples.acceptance_rate
    rec["max_rhat"] = float(np.nanmax(samples.rhat)) if np.any(np.isfinite(samples.rhat)) else math.nan
    rec["min_ess"] = float(np.nanmin(samples.ess)) if np.any(np.isfinite(samples.ess)) else math.nan
    wanted = set(spec.metrics)
    if "uwd1" in wanted:
        draws = posterior_predictive(_thinned(samples, spec.predictive_thin), spec.predictive_draws, _stream(spec.seed, n, r, 2, _method_id(method)))
        rec["uwd1"] = uwd1_predictive(draws, spec.truth)
    if wanted & {"tv", "kld", "wd1"}:
        _distances(spec, method, n, r, samples.point_distribution(), rec)


def _distances(spec, method, n, r, fitted: Distribution, rec: dict):
    wanted = set(spec.metrics)
    if "tv" in wanted:
        rec["tv"] = total_variation(fitted, spec.truth)
    if "kld" in wanted:
        k = kld_mc(spec.truth, fitted, spec.kld_draws, np.random.default_rng(_stream(spec.seed, n, r, 3, _method_id(method))))
        rec["kld"], rec["kld_se"] = k.value, k.se
    if "wd1" in wanted:
        rec["wd1"] = wasserstein_p(fitted, spec.truth, 1)


def run_study(spec: StudySpec, progress=None) -> StudyResult:
    """Run every (method, n, replicate) of a study.

    A replicate whose fit or scoring fails is recorded with its error and
    left out of the aggregates. More than 10% failures in any (method, n)
    cell raises :class:`StudyError` after all cells have run.
    """
    result = StudyResult(spec)
    grid = spec.grid
    too_many = []
    for n in spec.sample_sizes:
        values = simulate_quantiles(spec.truth, n, grid, spec.replicates, spec.seed)
        for method in spec.methods:
            if progress:
                progress(f"{spec.name}: {method} n={n}")
            model = method_model(method, spec.family, spec.components, spec.priors)
            if model is not None:
                fits = _run_bayes(spec, method, n, values)
            else:
                fits = []
                for r in range(spec.replicates):
                    t0 = time.perf_counter()
                    try:
                        qs = QuantileSet(grid, values[r], n)
                        fit = spl_fit(qs, spec.spl_tails) if method == "SPL" else kde_fit(qs)
                    except QuantMatchError as exc:
                        fit = exc
                    fits.append((fit, time.perf_counter() - t0))
            failures = 0
            for r, (fit, seconds) in enumerate(fits):
                rec = dict(method=method, n=n, K=spec.K, replicate=r, status="ok", error="", fit_seconds=seconds)
                try:
                    if isinstance(fit, Exception):
                        raise fit
                    if model is not None:
                        _score_bayes(spec, method, n, r, fit, model, rec, result.parameters)
                    else:
                        if "uwd1" in spec.metrics:
                            rec["uwd1"] = uwd1_cdf(fit, spec.truth)
                        _distances(spec, method, n, r, fit, rec)
                except (QuantMatchError, ArithmeticError, ValueError) as exc:
                    rec["status"] = "failed"
                    rec["error"] = f"{type(exc).__name__}: {exc}"
                    failures += 1
                result.records.append(rec)
            if failures > MAX_FAILURE_FRACTION * spec.replicates:
                too_many.append(f"{method} n={n}: {failures}/{spec.replicates}")
    if too_many:
        err = StudyError("more than 10% of replicates failed in " + "; ".join(too_many))
        err.result = result  # type: ignore[attr-defined]
        raise err
    return result


def run_components_study(spec: StudySpec, components=(1, 2, 3, 4, 5, 6), progress=None) -> StudyResult:
    """Fit normal mixtures with each component count; methods are labelled ``NAME[C=c]``.

    The returned result additionally carries, in ``component_summary``,
    the relative improvement of each distance from 4 to 5 components when
    both were fitted.
    """
    comps = [int(c) for c in components]
    if not comps or min(comps) < 1:
        raise PreconditionError("component counts must be positive integers")
    merged = StudyResult(spec)
    for c in comps:
        sub = replace(spec, family="NormalMixture", components=c, name=f"{spec.name}[C={c}]")
        res = run_study(sub, progress)
        for rec in res.records:
            rec["method"] = f"{rec['method']}[C={c}]"
            merged.records.append(rec)
        for p in res.parameters:
            p["method"] = f"{p['method']}[C={c}]"
            merged.parameters.append(p)
    merged.component_summary = component_summary(merged, comps)  # type: ignore[attr-defined]
    return merged


def component_summary(result: StudyResult, comps) -> list[dict]:
    """Mean distance per component count, with the 4 to 5 relative improvement."""
    rows = []
    for metric in ("uwd1", "tv", "kld"):
        table = result.table(metric)
        for (method, n), (mean, se) in sorted(table.items()):
            base, _, c = method.partition("[C=")
            rows.append(dict(metric=metric, method=base, n=n, components=int(c.rstrip("]")), mean=mean, se=se))
    for metric in ("uwd1", "tv", "kld"):
        by = {(r["method"], r["n"], r["components"]): r["mean"] for r in rows if r["metric"] == metric}
        for (method, n, c), m4 in list(by.items()):
            if c == 4 and (method, n, 5) in by and m4 > 0:
                rel = (m4 - by[(method, n, 5)]) / m4
                rows.append(dict(metric=f"{metric}_improvement_4_to_5", method=method, n=n, components=5, mean=rel, se=math.nan))
    return rows


def fidelity_check(fit, original: QuantileSet, max_draws: int = 2000) -> tuple[float, float]:
    """MAE and MSE between the fitted and the original quantiles at the original levels.

    For posterior samples the fitted quantiles are the posterior means of
    ``Q_theta(p_k)`` over (at most ``max_draws`` evenly spaced) draws.
    """
    p = original.probs
    if isinstance(fit, PosteriorSamples):
        step = max(1, len(fit) // max_draws)
        sub = replace(fit, draws=fit.draws[::step])
        theta = sub.theta()
        from .likelihoods import build_distribution, family_parameters

        names = [q.name for q in family_parameters(fit.model.family, fit.model.components)]
        trailing_theta = {k: theta[k] for k in names}
        dist = build_distribution(fit.model.family, trailing_theta, fit.model.components, trailing=1)
        fitted = np.asarray(dist._quantile(p)).mean(axis=0)
    elif isinstance(fit, Distribution):
        fitted = np.asarray(fit._quantile(p), dtype=float)
    else:
        fitted = np.asarray(fit, dtype=float)
    err = fitted - original.values
    return float(np.mean(np.abs(err))), float(np.mean(err * err))


# ---------------------------------------------------------------------------
# configuration


_STUDY_KEYS = {
    "name", "truth", "family", "sample_sizes", "levels", "K", "replicates", "methods", "seed", "metrics",
    "components", "level", "predictive_draws", "predictive_thin", "kld_draws", "spl_tails", "workers",
    "isolated_timing", "kind",
}


def study_from_config(path: str | Path, seed: int | None = None, workers: int | None = None) -> tuple[StudySpec, list[int] | None]:
    """Read a ``[study]`` config.

    Keys: ``truth`` (e.g. ``Normal mu=4 sigma=3.5``), ``family``,
    ``sample_sizes``, ``levels`` (``canonical``, ``uniform:K`` or a list) or
    ``K``, ``replicates``, ``methods``, ``metrics``, ``seed``,
    ``components`` (a list makes it a component-count study), ``level``,
    ``predictive_draws``, ``predictive_thin``, ``kld_draws``, ``spl_tails``,
    ``workers``, ``isolated_timing``. Returns the StudySpec and the component
    list for component-count studies (else ``None``).
    """
    cp = read_config(path)
    if not cp.has_section("study"):
        raise FormatError(f"{path}: missing [study] section")
    s = cp["study"]
    unknown = set(s) - _STUDY_KEYS
    if unknown:
        raise FormatError(f"{path}: unknown [study] key(s): {', '.join(sorted(unknown))}")
    for key in ("truth", "sample_sizes", "replicates", "methods"):
        if key not in s:
            raise FormatError(f"{path}: [study] needs {key!r}")
    truth = parse_truth(s["truth"])
    if "levels" in s:
        levels = parse_levels(s["levels"])
    else:
        levels = default_levels(_int(s.get("K", "23"), "K"))
    comps = parse_list(s.get("components", "1"), int)
    component_study = len(comps) > 1 or s.get("kind", "").strip() == "components"
    family = s.get("family", "NormalMixture" if component_study else truth.family)
    mcmc = mcmc_from_config(cp, McmcConfig(20_000, 5_000, seed=0))
    predictive_thin = _int(cp["mcmc"].get("predictive_thin", "10"), "predictive_thin") if cp.has_section("mcmc") else 10
    spec = StudySpec(
        truth=truth,
        family=family,
        sample_sizes=tuple(parse_list(s["sample_sizes"], int)),
        levels=levels,
        replicates=_int(s["replicates"], "replicates"),
        methods=tuple(parse_list(s["methods"])),
        seed=seed if seed is not None else _int(s.get("seed", "0"), "seed"),
        metrics=tuple(parse_list(s.get("metrics", "coverage"))),
        mcmc=mcmc,
        components=comps[0],
        priors=priors_from_config(cp),
        level=float(s.get("level", "0.9")),
        predictive_draws=_int(s.get("predictive_draws", "50000"), "predictive_draws"),
        predictive_thin=predictive_thin,
        kld_draws=_int(s.get("kld_draws", "100000"), "kld_draws"),
        spl_tails=TailFamily(s.get("spl_tails", "NormalTails")),
        workers=workers if workers is not None else _int(s.get("workers", "1"), "workers"),
        isolated_timing=parse_bool(s.get("isolated_timing", "false")),
        name=s.get("name", Path(path).stem),
    )
    return spec, (comps if component_study else None)


def describe(spec: StudySpec) -> str:
    return (
        f"{spec.name}: truth {format_distribution(spec.truth)}, family {spec.family}, n {list(spec.sample_sizes)}, "
        f"K {spec.K}, {spec.replicates} replicates, methods {list(spec.methods)}"
    )
