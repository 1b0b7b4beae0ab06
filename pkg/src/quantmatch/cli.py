"""Command-line interface: ``quantmatch <subcommand> ...``.

Subcommands
-----------
fit
    Fit one quantile CSV (Bayesian model, least squares, SPL or KDE).
simulate-study
    Run a simulation study from a config file and write its CSV tables.
score-hub
    Fit and score hub quantile forecasts against observed counts.
distance
    Distances between two distributions.
evaluate
    CDF, PDF and quantile tables of a distribution or fit.

Every subcommand takes ``--seed``, ``--threads`` and ``--out``. Usage
errors exit with status 2, data and file errors with status 1.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from collections import defaultdict
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import mcmc_from_config, model_from_config, parse_levels, priors_from_config, read_config
from .distributions import Distribution, format_distribution, parse_distribution
from .empirical import ProbabilityGrid, QuantileSet, read_quantile_csv
from .errors import QuantMatchError, StudyError
from .harness import (
    METHODS,
    describe,
    fidelity_check,
    method_model,
    run_components_study,
    run_study,
    study_from_config,
)
from .hub_io import KEY_FIELDS, parse_hub_csv, preprocess, read_truth_csv
from .inference import (
    McmcConfig,
    PosteriorSamples,
    fit_least_squares,
    fit_mcmc,
    fit_mcmc_batch,
    posterior_predictive,
    read_posterior_csv,
)
from .likelihoods import ModelSpec, PriorSpec
from .metrics import ScoreRecord, crps_sample, kld_mc, total_variation, uwd1_cdf, wasserstein_p, wis_components, write_scores_csv
from .nonparametric import TailFamily, kde_fit, parse_matched, spl_fit

FIT_METHODS = (*METHODS, "LS")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, out_default: str) -> None:
    p.add_argument("--seed", type=int, default=None, help="random seed (default: from config, else 0)")
    p.add_argument("--threads", type=int, default=1, help="worker processes for batched fits (default 1)")
    p.add_argument("--out", default=out_default, help=f"output directory (default {out_default})")


def _mcmc_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--draws", type=int, default=None, help="total MCMC iterations per chain")
    p.add_argument("--burn-in", type=int, default=None, help="warm-up iterations per chain")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="quantmatch", description="Fit distributions to sets of quantiles.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("fit", help="fit a quantile CSV")
    p.add_argument("quantiles", help="CSV of probability,value rows")
    p.add_argument("--config", help="model config ([model], [priors], [mcmc])")
    p.add_argument("--method", choices=FIT_METHODS, default=None, help="fit method (overrides the config kind)")
    p.add_argument("--family", default=None, help="distribution family (default Normal)")
    p.add_argument("--components", type=int, default=None, help="mixture components")
    p.add_argument("--n", type=float, default=None, help="sample size behind the quantiles, if known")
    p.add_argument("--tails", choices=[t.value for t in TailFamily], default=TailFamily.NORMAL.value, help="SPL tails")
    p.add_argument("--level", type=float, default=0.9, help="credible level of the summary intervals")
    _mcmc_flags(p)
    _common(p, "fit_out")

    p = sub.add_parser("simulate-study", help="run a simulation study")
    p.add_argument("config", help="study config ([study], optional [priors], [mcmc])")
    p.add_argument("--quiet", action="store_true", help="no progress messages")
    _common(p, "study_out")

    p = sub.add_parser("score-hub", help="score hub quantile forecasts")
    p.add_argument("hub", help="hub-format forecast CSV")
    p.add_argument("truth", help="truth CSV (date, location, value)")
    p.add_argument("--method", choices=FIT_METHODS, default="QGP", help="fit method for the CRPS (default QGP)")
    p.add_argument("--config", help="model config overriding the default 4-component normal mixture")
    p.add_argument("--components", type=int, default=4, help="mixture components (default 4)")
    p.add_argument("--team", default=None, help="team name when the file has no model_id column")
    p.add_argument("--predictive-draws", type=int, default=10_000, help="draws for the sample CRPS")
    _mcmc_flags(p)
    _common(p, "score_out")

    p = sub.add_parser("distance", help="distances between two distributions")
    p.add_argument("first", help='distribution text (e.g. "Normal mu=0 sigma=1") or a file holding one')
    p.add_argument("second", help="the reference (true) distribution, same forms")
    p.add_argument("--metrics", default="tv,kld,wd1,uwd1", help="comma list of tv, kld, wd1, wd2, uwd1")
    p.add_argument("--kld-draws", type=int, default=100_000)
    _common(p, "distance_out")

    p = sub.add_parser("evaluate", help="cdf/pdf/quantile tables of a distribution or fit")
    p.add_argument("fitted", help="distribution text, a file holding one, or a posterior CSV (with --config)")
    p.add_argument("--config", help="model config of a posterior CSV")
    p.add_argument("--x", default=None, help="x grid as lo:hi:count (default spans the 0.001-0.999 quantiles)")
    p.add_argument("--levels", default="uniform:99", help="probability levels: canonical, uniform:K or a list")
    _common(p, "evaluate_out")
    return parser


# ---------------------------------------------------------------------------
# helpers


def _load_distribution(spec: str) -> Distribution:
    path = Path(spec)
    text = path.read_text().strip() if path.is_file() else spec.strip()
    head = text.split(None, 1)[0] if text else ""
    if head in ("SPL", "KDE"):
        return parse_matched(text)
    return parse_distribution(text)


def _mcmc_config(args, model: ModelSpec, cp=None) -> McmcConfig:
    base = McmcConfig.for_model(model, seed=args.seed or 0)
    cfg = mcmc_from_config(cp, base) if cp is not None else base
    over = {}
    if args.draws is not None:
        over["total_draws"] = args.draws
    if args.burn_in is not None:
        over["burn_in"] = args.burn_in
    if args.seed is not None:
        over["seed"] = args.seed
    return replace(cfg, **over) if over else cfg


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _fit_model(args, cp) -> ModelSpec | None:
    """The Bayesian model from the config and flags; ``None`` for LS, SPL and KDE."""
    if args.method in ("LS", "SPL", "KDE"):
        return None
    family = args.family
    if args.method is not None:
        model = method_model(args.method, family or "Normal", args.components or 1)
        if cp is not None:
            model = replace(model, priors=priors_from_config(cp))
    elif cp is not None and cp.has_section("model"):
        model = model_from_config(cp)
        if family is not None or args.components is not None:
            model = replace(model, family=family or model.family, components=args.components or model.components)
    else:
        model = method_model("QGP-n" if args.n is not None else "QGP", family or "Normal", args.components or 1)
    if args.n is not None:
        model = replace(model, n_known=True, n=float(args.n))
    return model


# ---------------------------------------------------------------------------
# subcommands


def cmd_fit(args) -> int:
    out = Path(args.out)
    cp = read_config(args.config) if args.config else None
    qs = read_quantile_csv(args.quantiles, int(args.n) if args.n is not None else None)
    model = _fit_model(args, cp)
    out.mkdir(parents=True, exist_ok=True)
    if model is None:
        if args.method == "SPL":
            fit = spl_fit(qs, args.tails)
            text = fit.to_text()
        elif args.method == "KDE":
            fit = kde_fit(qs)
            text = fit.to_text()
        else:
            ls = fit_least_squares(args.family or "Normal", qs, components=args.components or 1)
            fit = ls.distribution(args.components or 1)
            text = format_distribution(fit)
            _write_csv(out / "ls_params.csv", ["parameter", "value"], _flat_params(ls.params))
        mae, mse = fidelity_check(fit, qs)
    else:
        if model.estimates_n is False and model.n is None and qs.sample_size is None:
            raise QuantMatchError(f"{model.kind.value} with known n needs --n or n in the config")
        cfg = _mcmc_config(args, model, cp)
        samples = fit_mcmc(model, qs, cfg)
        samples.to_csv(out / "posterior.csv", level=args.level)
        text = format_distribution(samples.point_distribution())
        mae, mse = fidelity_check(samples, qs)
        for row in samples.summary_rows(args.level):
            print(
                f"{row['parameter']:>8s}  mean {row['mean']:.6g}  {100 * args.level:g}% [{row['low']:.6g}, {row['high']:.6g}]"
                f"  rhat {row['rhat']:.4f}  ess {row['ess']:.0f}"
            )
        print(f"acceptance rate {samples.acceptance_rate:.3f}")
    (out / "fit.txt").write_text(text + "\n")
    _write_csv(out / "fidelity.csv", ["mae", "mse"], [(mae, mse)])
    print(f"fit: {text}")
    print(f"fidelity: MAE {mae:.6g}  MSE {mse:.6g}")
    print(f"wrote {out}")
    return 0


def _flat_params(params: dict):
    for k, v in params.items():
        a = np.atleast_1d(np.asarray(v, dtype=float))
        if a.size == 1:
            yield (k, float(a[0]))
        else:
            for i, x in enumerate(a, start=1):
                yield (f"{k}[{i}]", float(x))


def cmd_simulate_study(args) -> int:
    spec, comps = study_from_config(args.config, seed=args.seed, workers=args.threads)
    progress = None if args.quiet else (lambda msg: print(msg, file=sys.stderr, flush=True))
    if progress:
        progress(describe(spec))
    try:
        result = run_components_study(spec, comps, progress) if comps else run_study(spec, progress)
    except StudyError as exc:
        partial = getattr(exc, "result", None)
        if partial is not None:
            partial.write(args.out)
        raise
    paths = result.write(args.out)
    if comps:
        rows = result.component_summary  # type: ignore[attr-defined]
        _write_csv(
            Path(args.out) / "components.csv",
            ["metric", "method", "n", "components", "mean", "se"],
            [(r["metric"], r["method"], r["n"], r["components"], r["mean"], r["se"]) for r in rows],
        )
    for r in result.aggregate():
        se = "" if math.isnan(r["se"]) else f" +- {r['se']:.4g}"
        print(f"{r['method']:>16s}  n={r['n']:<6d} {r['metric']:<18s} {r['mean']:.4g}{se}")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


def _hub_model(args, cp) -> ModelSpec | None:
    if args.method in ("LS", "SPL", "KDE"):
        return None
    if cp is not None and cp.has_section("model"):
        return model_from_config(cp)
    priors = priors_from_config(cp) if cp is not None else PriorSpec()
    return method_model(args.method, "NormalMixture", args.components, priors)


def cmd_score_hub(args) -> int:
    out = Path(args.out)
    cp = read_config(args.config) if args.config else None
    parsed = parse_hub_csv(args.hub, args.team)
    truth = read_truth_csv(args.truth)
    model = _hub_model(args, cp)
    if model is not None and not model.estimates_n and model.n is None:
        raise QuantMatchError("hub forecasts have no sample size; use a method that estimates n")
    rng_root = np.random.SeedSequence(args.seed or 0)
    rejects = [(r.line, r.reason) for r in parsed.rejects]
    items = []
    for f in parsed.forecasts:
        y = truth.get(f.location, f.target_end_date)
        if y is None:
            rejects.append(("", f"{'/'.join(f.key)}: no truth for {f.location} on {f.target_end_date}"))
            continue
        try:
            qs = preprocess(f)
        except QuantMatchError as exc:
            rejects.append(("", str(exc)))
            continue
        items.append((f, qs, math.log1p(y)))

    # forecasts sharing a level set are fitted as one batch
    fits: dict[int, object] = {}
    if model is not None:
        cfg = _mcmc_config(args, model, cp)
        groups = defaultdict(list)
        for i, (_, qs, _) in enumerate(items):
            groups[tuple(qs.probs)].append(i)
        for probs, idx in groups.items():
            values = np.stack([items[i][1].values for i in idx])
            seeds = [rng_root.spawn(1)[0] for _ in idx]
            res = fit_mcmc_batch(model, values, ProbabilityGrid(np.array(probs)), cfg, seeds=seeds)
            fits.update(zip(idx, res))
    records = []
    for i, (f, qs, y) in enumerate(items):
        try:
            if model is not None:
                fit = fits[i]
                if isinstance(fit, Exception):
                    raise fit
                draws = posterior_predictive(fit, args.predictive_draws, rng_root.spawn(1)[0])
            else:
                fit = spl_fit(qs) if args.method == "SPL" else kde_fit(qs) if args.method == "KDE" else (
                    fit_least_squares("NormalMixture", qs, components=args.components).distribution(args.components)
                )
                draws = fit.sample(args.predictive_draws, np.random.default_rng(rng_root.spawn(1)[0]))
            mae, mse = fidelity_check(fit, qs)
        except QuantMatchError as exc:
            rejects.append(("", f"{'/'.join(f.key)}: fit failed: {exc}"))
            continue
        # WIS on the submitted forecast (all levels, zeros included), log scale
        raw = QuantileSet.from_arrays(f.probs, np.log1p(f.values))
        try:
            abs_err, comps = wis_components(raw, y)
            w = (0.5 * abs_err + sum(0.5 * a * s for a, s in comps)) / (len(comps) + 0.5)
        except QuantMatchError as exc:
            rejects.append(("", f"{'/'.join(f.key)}: {exc}"))
            continue
        records.append(
            ScoreRecord(
                f.key, float(w), crps_sample(draws, y), tuple(comps),
                {"mae": mae, "mse": mse, "k_fitted": float(len(qs)), "log_truth": y},
            )
        )
    out.mkdir(parents=True, exist_ok=True)
    write_scores_csv(records, out / "scores.csv", KEY_FIELDS)
    _write_csv(out / "rejects.csv", ["line", "reason"], rejects)
    print(f"scored {len(records)} forecast(s) with {args.method}; {len(rejects)} reject(s); "
          f"{parsed.skipped_non_quantile} non-quantile row(s) skipped")
    for w in parsed.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote {out / 'scores.csv'}")
    return 0


def cmd_distance(args) -> int:
    a, b = _load_distribution(args.first), _load_distribution(args.second)
    wanted = [m.strip() for m in args.metrics.split(",") if m.strip()]
    rows = []
    for m in wanted:
        if m == "tv":
            rows.append(("tv", total_variation(a, b), ""))
        elif m == "kld":
            k = kld_mc(b, a, args.kld_draws, args.seed or 0)
            rows.append(("kld", k.value, k.se))
        elif m in ("wd1", "wd2"):
            rows.append((m, wasserstein_p(a, b, int(m[-1])), ""))
        elif m == "uwd1":
            rows.append(("uwd1", uwd1_cdf(a, b), ""))
        else:
            raise _UsageError(f"unknown metric {m!r}; choose from tv, kld, wd1, wd2, uwd1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "distance.csv", ["metric", "value", "se"], rows)
    for name, v, se in rows:
        print(f"{name:>5s}  {v:.6g}" + (f"  (se {se:.2g})" if se != "" else ""))
    return 0


class _UsageError(Exception):
    pass


def _parse_x(text: str) -> np.ndarray:
    try:
        lo, hi, count = text.split(":")
        return np.linspace(float(lo), float(hi), int(count))
    except ValueError:
        raise _UsageError(f"--x expects lo:hi:count, got {text!r}") from None


def cmd_evaluate(args) -> int:
    path = Path(args.fitted)
    if path.suffix == ".csv" and path.is_file():
        if not args.config:
            raise _UsageError("a posterior CSV needs --config with its model")
        dist = read_posterior_csv(path, model_from_config(read_config(args.config))).point_distribution()
    else:
        dist = _load_distribution(args.fitted)
    p = parse_levels(args.levels)
    if args.x:
        x = _parse_x(args.x)
    else:
        lo, hi = dist.quantile(np.array([0.001, 0.999]))
        x = np.linspace(lo, hi, 201)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cdf, pdf = np.asarray(dist.cdf(x)), np.asarray(dist.pdf(x))
    _write_csv(out / "density.csv", ["x", "cdf", "pdf"], zip(x, cdf, pdf))
    _write_csv(out / "quantiles.csv", ["p", "quantile"], zip(p, np.asarray(dist.quantile(p))))
    print(f"evaluated {format_distribution(dist) if not hasattr(dist, 'to_text') else dist.method} "
          f"at {x.size} x values and {p.size} levels; wrote {out}")
    return 0


COMMANDS = {
    "fit": cmd_fit,
    "simulate-study": cmd_simulate_study,
    "score-hub": cmd_score_hub,
    "distance": cmd_distance,
    "evaluate": cmd_evaluate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return COMMANDS[args.command](args)
    except _UsageError as exc:
        parser.error(str(exc))
    except (QuantMatchError, OSError) as exc:
        print(f"quantmatch {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
