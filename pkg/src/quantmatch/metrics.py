"""Distances between distributions and scores of quantile forecasts.

Distances: the p-Wasserstein distance through quantile functions, the
uniform 1-Wasserstein distance of PIT values (UWD1), total variation and a
Monte-Carlo Kullback-Leibler divergence. Scores: interval score, weighted
interval score and the sample CRPS.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .distributions import Distribution
from .empirical import QuantileSet
from .errors import DomainError, NumericError, PreconditionError

__all__ = [
    "WassersteinResult",
    "KldResult",
    "ScoreRecord",
    "wasserstein_p",
    "uwd1",
    "uwd1_cdf",
    "uwd1_predictive",
    "total_variation",
    "kld_mc",
    "interval_score",
    "wis",
    "wis_components",
    "crps_sample",
    "write_scores_csv",
]

QUAD_LIMIT = 2000
QUAD_EPSABS = 1e-8
TAIL_BOUND = 1e-6


def _quad(fn, a, b, points=None, what="integral", tol=1e-6):
    """``quad`` that raises on failure.

    A roundoff report is accepted when the error estimate is below ``tol``:
    the integrand is then resolved to the precision it is computed at.
    """
    val, err, info, *msg = integrate.quad(
        fn, a, b, points=points, limit=QUAD_LIMIT, epsabs=QUAD_EPSABS, epsrel=1e-10, full_output=1
    )
    ier = 0 if not msg else (2 if "roundoff" in msg[0] else 1)
    if ier == 1 or (ier == 2 and not err < tol):
        raise NumericError(f"{what}: adaptive quadrature did not converge ({msg[0].strip()})")
    return val, err


# ---------------------------------------------------------------------------
# Wasserstein


class WassersteinResult(NamedTuple):
    value: float
    quad_error: float
    truncation: float


def wasserstein_p(a: Distribution, b: Distribution, order: float = 1.0, eps: float = 1e-6, full_output: bool = False):
    """``(int_0^1 |Q_a(t) - Q_b(t)|^p dt)^(1/p)`` by adaptive quadrature on ``(eps, 1 - eps)``.

    With ``full_output`` a :class:`WassersteinResult` also reports the
    quadrature error and an estimate of the truncated tail mass,
    ``eps (|dQ(eps)|^p + |dQ(1 - eps)|^p)``.
    """
    if order < 1:
        raise PreconditionError("Wasserstein order must be at least 1")
    if a is b:
        return WassersteinResult(0.0, 0.0, 0.0) if full_output else 0.0

    def integrand(t):
        return abs(float(a._quantile(np.float64(t))) - float(b._quantile(np.float64(t)))) ** order

    val, err = _quad(integrand, eps, 1.0 - eps, what="Wasserstein distance")
    trunc = eps * (integrand(eps) + integrand(1.0 - eps))
    value = max(val, 0.0) ** (1.0 / order)
    return WassersteinResult(value, err, trunc) if full_output else value


# ---------------------------------------------------------------------------
# UWD1


def _abs_linear_integral(c, a, b):
    """``int_a^b |c - u| du`` elementwise, for a <= b."""
    left = ((b - c) ** 2 - (a - c) ** 2) / 2.0
    right = ((c - a) ** 2 - (c - b) ** 2) / 2.0
    mid = ((c - a) ** 2 + (b - c) ** 2) / 2.0
    return np.where(c <= a, left, np.where(c >= b, right, mid))


def uwd1(pit_sample) -> float:
    """``2 int_0^1 |F_hat(u) - u| du`` for the empirical CDF of PIT values.

    Computed exactly: between consecutive order statistics the empirical CDF
    is constant, so each piece integrates in closed form.
    """
    u = np.sort(np.asarray(pit_sample, dtype=float).ravel())
    if u.size == 0:
        raise PreconditionError("UWD1 needs a nonempty sample")
    if np.any(~np.isfinite(u)) or u[0] < 0 or u[-1] > 1:
        raise DomainError("PIT values must lie in [0, 1]")
    m = u.size
    edges = np.concatenate([[0.0], u, [1.0]])
    level = np.arange(m + 1) / m
    return float(2.0 * np.sum(_abs_linear_integral(level, edges[:-1], edges[1:])))


def uwd1_predictive(draws, truth: Distribution) -> float:
    """UWD1 of predictive draws pushed through the true CDF."""
    return uwd1(np.clip(truth.cdf(np.asarray(draws, dtype=float)), 0.0, 1.0))


def uwd1_cdf(fitted: Distribution, truth: Distribution, eps: float = 1e-6) -> float:
    """UWD1 with the exact PIT CDF ``u -> F_fit(Q_true(u))``, by quadrature."""

    def integrand(t):
        return abs(float(fitted._cdf(truth._quantile(np.float64(t)))) - t)

    val, _ = _quad(integrand, eps, 1.0 - eps, what="UWD1")
    # the truncated ends contribute at most eps each
    return float(min(2.0 * val, 1.0))


# ---------------------------------------------------------------------------
# total variation and KLD


def _support_hint(f: Distribution, g: Distribution):
    lo = min(float(np.min(f._quantile_raw(np.float64(1e-9)))), float(np.min(g._quantile_raw(np.float64(1e-9)))))
    hi = max(float(np.max(f._quantile_raw(np.float64(1 - 1e-9)))), float(np.max(g._quantile_raw(np.float64(1 - 1e-9)))))
    return lo, hi


def _breakpoints(f: Distribution, g: Distribution):
    levels = np.array([0.001, 0.01, 0.1, 0.5, 0.9, 0.99, 0.999])
    pts = []
    for d in (f, g):
        with np.errstate(all="ignore"):
            pts.extend(np.ravel(d._quantile_raw(levels)))
        if hasattr(d, "breakpoints"):
            pts.extend(np.ravel(d.breakpoints()))
    return np.asarray(pts, dtype=float)


def total_variation(f: Distribution, g: Distribution, support: tuple[float, float] | None = None) -> float:
    """``1/2 int |f - g|`` by adaptive quadrature.

    The range starts from ``support`` (or the 1e-9 quantiles of both) and is
    widened until the mass the two distributions leave outside it is below
    1e-6, which bounds the neglected part of the integral.
    """
    if f is g:
        return 0.0
    lo, hi = support if support is not None else _support_hint(f, g)
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise PreconditionError(f"invalid support range ({lo}, {hi})")

    def tail_mass(a, b):
        return float(f._cdf(np.float64(a)) + g._cdf(np.float64(a)) + (1.0 - f._cdf(np.float64(b))) + (1.0 - g._cdf(np.float64(b))))

    for _ in range(60):
        if 0.5 * tail_mass(lo, hi) < TAIL_BOUND:
            break
        w = hi - lo
        lo, hi = lo - 0.5 * w, hi + 0.5 * w
    else:
        raise NumericError("could not find a range holding all but 1e-6 of both distributions")
    pts = _breakpoints(f, g)
    pts = np.unique(pts[np.isfinite(pts) & (pts > lo) & (pts < hi)])

    def integrand(x):
        return abs(float(f._pdf(np.float64(x))) - float(g._pdf(np.float64(x))))

    val, _ = _quad(integrand, lo, hi, points=pts if pts.size else None, what="total variation")
    return float(min(max(0.5 * val, 0.0), 1.0))


class KldResult(NamedTuple):
    value: float
    se: float
    nonfinite: int


def kld_mc(g: Distribution, f: Distribution, count: int = 100_000, seed=None) -> KldResult:
    """Monte-Carlo estimate of ``KL(g || f) = E_g[log g(Y) - log f(Y)]``.

    ``g`` is the reference (true) distribution sampled by inverse transform.
    Draws where the log ratio is not finite make the estimate ``+inf`` and
    are counted in ``nonfinite``.
    """
    if count < 2:
        raise PreconditionError("the KLD estimate needs at least two draws")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    y = g.sample(count, rng)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.asarray(g.logpdf(y)) - np.asarray(f.logpdf(y))
    bad = ~np.isfinite(r)
    if np.any(bad):
        return KldResult(math.inf, math.nan, int(bad.sum()))
    return KldResult(float(r.mean()), float(r.std(ddof=1) / math.sqrt(count)), 0)


# ---------------------------------------------------------------------------
# scores


def interval_score(l, r, alpha, y):
    """``(r - l) + (2/alpha)(l - y) 1{y < l} + (2/alpha)(y - r) 1{y > r}``."""
    l, r, alpha, y = (np.asarray(v, dtype=float) for v in (l, r, alpha, y))
    if np.any(l > r):
        raise PreconditionError("interval lower end exceeds upper end")
    if np.any((alpha <= 0) | (alpha >= 1)):
        raise PreconditionError("alpha must lie in (0, 1)")
    out = (r - l) + 2.0 / alpha * (l - y) * (y < l) + 2.0 / alpha * (y - r) * (y > r)
    return float(out) if out.ndim == 0 else out


def _central_intervals(qs: QuantileSet):
    p, v = qs.probs, qs.values
    mid = np.nonzero(np.isclose(p, 0.5, rtol=0, atol=1e-9))[0]
    if mid.size != 1:
        raise PreconditionError("WIS needs the 0.5 level (the median) in the grid")
    lows = np.nonzero(p < 0.5 - 1e-9)[0]
    highs = np.nonzero(p > 0.5 + 1e-9)[0]
    out = []
    for i in lows:
        j = np.nonzero(np.isclose(p[highs], 1.0 - p[i], rtol=0, atol=1e-9))[0]
        if j.size != 1:
            raise PreconditionError(f"level {p[i]!r} has no matching upper level {1 - p[i]!r}")
        out.append((2.0 * p[i], v[i], v[highs[j[0]]]))
    if len(lows) != len(highs):
        matched = {round(1.0 - p[i], 9) for i in lows}
        extra = [p[k] for k in highs if round(p[k], 9) not in matched]
        raise PreconditionError(f"level {extra[0]!r} has no matching lower level")
    return v[mid[0]], out


def wis_components(qs: QuantileSet, y: float) -> tuple[float, list[tuple[float, float]]]:
    """Absolute median error and ``(alpha_r, IS_alpha_r)`` for each central interval."""
    median, intervals = _central_intervals(qs)
    return abs(y - median), [(a, interval_score(lo, hi, a, y)) for a, lo, hi in intervals]


def wis(qs: QuantileSet, y: float) -> float:
    """Weighted interval score of a quantile forecast.

    ``(w_0 |y - m| + sum_r w_r IS_alpha_r) / (R + 1/2)`` with ``w_0 = 1/2``
    and ``w_r = alpha_r / 2``; the interval levels come from the symmetric
    pairs ``(p, 1 - p)`` of the grid, ``alpha = 2p``.
    """
    abs_err, comps = wis_components(qs, y)
    total = 0.5 * abs_err + sum(0.5 * a * s for a, s in comps)
    return float(total / (len(comps) + 0.5))


def crps_sample(draws, y: float) -> float:
    """``E|X - y| - 1/2 E|X - X'|`` over the empirical distribution of the draws.

    Uses the sorted-sample identity
    ``E|X - X'| = 2 / M^2 sum_i (2i - M - 1) x_(i)``.
    """
    x = np.sort(np.asarray(draws, dtype=float).ravel())
    m = x.size
    if m == 0:
        raise PreconditionError("CRPS needs at least one draw")
    e1 = float(np.mean(np.abs(x - y)))
    i = np.arange(1, m + 1)
    e2 = 2.0 * float(np.dot(2 * i - m - 1, x)) / (m * m)
    return max(e1 - 0.5 * e2, 0.0)


@dataclass(frozen=True)
class ScoreRecord:
    """Scores of one forecast; ``components`` holds ``(alpha, IS)`` pairs."""

    key: tuple[str, ...]
    wis: float
    crps: float
    components: tuple[tuple[float, float], ...] = ()
    extra: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.wis < 0 or self.crps < 0:
            raise PreconditionError("scores must be nonnegative")


def write_scores_csv(records: list[ScoreRecord], path: str | Path, key_names: tuple[str, ...]) -> None:
    """One row per record: key fields, wis, crps, extra values, then per-interval IS."""
    alphas = sorted({a for r in records for a, _ in r.components})
    extra_names = sorted({k for r in records for k in r.extra})
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*key_names, "wis", "crps", *extra_names, *[f"is_{a:g}" for a in alphas]])
        for r in records:
            comp = dict(r.components)
            w.writerow(
                [
                    *r.key,
                    repr(r.wis),
                    repr(r.crps),
                    *[repr(float(r.extra.get(k, math.nan))) for k in extra_names],
                    *[repr(float(comp.get(a, math.nan))) for a in alphas],
                ]
            )
