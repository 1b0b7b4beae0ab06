"""Nonparametric quantile matching: monotone spline CDFs and Gaussian KDE.

``spl_fit`` interpolates the (value, probability) pairs with a monotone
cubic Hermite CDF and attaches parametric tails beyond the outermost
quantiles. ``kde_fit`` treats the quantile values as a sample and places a
Gaussian kernel on each of them.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import ClassVar

import numpy as np
from scipy import special

from .distributions import Distribution, NormalMixture
from .empirical import QuantileSet
from .errors import FormatError, PreconditionError

__all__ = [
    "TailFamily",
    "MatchedDistribution",
    "SplineDistribution",
    "KdeDistribution",
    "spl_fit",
    "kde_fit",
    "silverman_bandwidth",
    "fritsch_carlson_slopes",
    "collapse_ties",
    "parse_matched",
]


class TailFamily(str, Enum):
    NORMAL = "NormalTails"
    EXPONENTIAL = "ExponentialTails"


class MatchedDistribution(Distribution):
    """A distribution assembled from a nonparametric fit to quantiles."""

    method: ClassVar[str] = ""

    def to_text(self) -> str:
        raise NotImplementedError


def _fmt(a) -> str:
    return ",".join(repr(float(v)) for v in np.ravel(a))


# ---------------------------------------------------------------------------
# SPL


def collapse_ties(values: np.ndarray, probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge equal quantile values into one knot at their mean probability."""
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    uniq, inverse = np.unique(values, return_inverse=True)
    if uniq.size == values.size:
        return values, probs
    counts = np.bincount(inverse)
    merged = np.bincount(inverse, weights=probs) / counts
    warnings.warn(f"collapsed {values.size - uniq.size} tied quantile values", RuntimeWarning, stacklevel=3)
    return uniq, merged


def fritsch_carlson_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Knot derivatives of a monotone cubic Hermite interpolant.

    Interior slopes start at the mean of the adjacent secants (zero where
    the secants change sign or vanish) and end slopes at the one-sided
    secant; each interval's pair is then shrunk onto the disc
    ``alpha^2 + beta^2 <= 9``, which keeps every cubic monotone.
    """
    h = np.diff(x)
    delta = np.diff(y) / h
    m = np.empty_like(x)
    m[0], m[-1] = delta[0], delta[-1]
    if x.size > 2:
        avg = 0.5 * (delta[:-1] + delta[1:])
        same = delta[:-1] * delta[1:] > 0
        m[1:-1] = np.where(same, avg, 0.0)
    for k in range(delta.size):
        if delta[k] == 0:
            m[k] = m[k + 1] = 0.0
            continue
        a, b = m[k] / delta[k], m[k + 1] / delta[k]
        r = a * a + b * b
        if r > 9.0:
            tau = 3.0 / math.sqrt(r)
            m[k] = tau * a * delta[k]
            m[k + 1] = tau * b * delta[k]
    return m


@dataclass(frozen=True, eq=False)
class SplineDistribution(MatchedDistribution):
    """Monotone Hermite CDF through the knots with parametric tails.

    ``lower`` and ``upper`` hold the tail parameters: ``(mean, sd)`` of a
    normal for ``NormalTails`` and the exponential decay rate (with the rate
    in the first slot) for ``ExponentialTails``.
    """

    x: np.ndarray
    p: np.ndarray
    slopes: np.ndarray
    tails: TailFamily
    lower: tuple[float, float]
    upper: tuple[float, float]

    family: ClassVar[str] = "SPL"
    method: ClassVar[str] = "SPL"
    closed_form_cdf: ClassVar[bool] = True

    def __post_init__(self):
        for name in ("x", "p", "slopes"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "tails", TailFamily(self.tails))

    def params(self) -> dict:
        return dict(x=self.x, p=self.p, slopes=self.slopes)

    def breakpoints(self) -> np.ndarray:
        """Knots, where the density has kinks."""
        return self.x.copy()

    # tails ------------------------------------------------------------------
    def _lower_cdf(self, x):
        if self.tails is TailFamily.NORMAL:
            m, s = self.lower
            return special.ndtr((x - m) / s)
        rate = self.lower[0]
        with np.errstate(over="ignore"):
            return self.p[0] * np.exp(rate * (x - self.x[0]))

    def _upper_cdf(self, x):
        if self.tails is TailFamily.NORMAL:
            m, s = self.upper
            return special.ndtr((x - m) / s)
        rate = self.upper[0]
        return 1.0 - (1.0 - self.p[-1]) * np.exp(-rate * (x - self.x[-1]))

    def _lower_pdf(self, x):
        if self.tails is TailFamily.NORMAL:
            m, s = self.lower
            z = (x - m) / s
            return np.exp(-0.5 * z * z) / (s * math.sqrt(2.0 * math.pi))
        return self.lower[0] * self._lower_cdf(x)

    def _upper_pdf(self, x):
        if self.tails is TailFamily.NORMAL:
            m, s = self.upper
            z = (x - m) / s
            return np.exp(-0.5 * z * z) / (s * math.sqrt(2.0 * math.pi))
        return self.upper[0] * (1.0 - self._upper_cdf(x))

    def _lower_quantile(self, p):
        if self.tails is TailFamily.NORMAL:
            m, s = self.lower
            return m + s * special.ndtri(p)
        return self.x[0] + np.log(p / self.p[0]) / self.lower[0]

    def _upper_quantile(self, p):
        if self.tails is TailFamily.NORMAL:
            m, s = self.upper
            return m + s * special.ndtri(p)
        return self.x[-1] - np.log((1.0 - p) / (1.0 - self.p[-1])) / self.upper[0]

    # interior ---------------------------------------------------------------
    def _segment(self, x):
        k = np.clip(np.searchsorted(self.x, x, side="right") - 1, 0, self.x.size - 2)
        h = self.x[k + 1] - self.x[k]
        return k, h, (x - self.x[k]) / h

    def _hermite(self, k, h, t):
        t2, t3 = t * t, t * t * t
        h00 = 2 * t3 - 3 * t2 + 1
        h10 = t3 - 2 * t2 + t
        h01 = -2 * t3 + 3 * t2
        h11 = t3 - t2
        return h00 * self.p[k] + h10 * h * self.slopes[k] + h01 * self.p[k + 1] + h11 * h * self.slopes[k + 1]

    def _hermite_deriv(self, k, h, t):
        t2 = t * t
        d00 = 6 * t2 - 6 * t
        d10 = 3 * t2 - 4 * t + 1
        d01 = -6 * t2 + 6 * t
        d11 = 3 * t2 - 2 * t
        return (d00 * self.p[k] + d01 * self.p[k + 1]) / h + d10 * self.slopes[k] + d11 * self.slopes[k + 1]

    def _cdf(self, x):
        x = np.asarray(x, dtype=float)
        k, h, t = self._segment(x)
        inner = self._hermite(k, h, t)
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.where(x < self.x[0], self._lower_cdf(x), np.where(x > self.x[-1], self._upper_cdf(x), inner))
        # exact at the knots
        hit = np.searchsorted(self.x, x)
        hit_c = np.clip(hit, 0, self.x.size - 1)
        out = np.where(self.x[hit_c] == x, self.p[hit_c], out)
        return np.clip(out, 0.0, 1.0)

    def _pdf(self, x):
        x = np.asarray(x, dtype=float)
        k, h, t = self._segment(x)
        inner = self._hermite_deriv(k, h, t)
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.where(x < self.x[0], self._lower_pdf(x), np.where(x > self.x[-1], self._upper_pdf(x), inner))
        return np.maximum(out, 0.0)

    def _quantile(self, p):
        p = np.asarray(p, dtype=float)
        k = np.clip(np.searchsorted(self.p, p, side="right") - 1, 0, self.p.size - 2)
        h = self.x[k + 1] - self.x[k]
        # the interpolant is monotone in t on each segment, so bisection is safe
        lo = np.zeros(p.shape)
        hi = np.ones(p.shape)
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            below = self._hermite(k, h, mid) < p
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        inner = self.x[k] + h * 0.5 * (lo + hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(p < self.p[0], self._lower_quantile(p), np.where(p > self.p[-1], self._upper_quantile(p), inner))
        hit = np.clip(np.searchsorted(self.p, p), 0, self.p.size - 1)
        return np.where(self.p[hit] == p, self.x[hit], out)

    def _quantile_raw(self, p):
        p = np.asarray(p, dtype=float)
        inf = np.where(p <= 0.0, -np.inf, np.inf)
        return np.where((p <= 0.0) | (p >= 1.0), inf, self._quantile(np.clip(p, 1e-300, 1 - 1e-16)))

    def support(self) -> tuple[float, float]:
        return -math.inf, math.inf

    def to_text(self) -> str:
        return (
            f"SPL tails={self.tails.value} x={_fmt(self.x)} p={_fmt(self.p)} slopes={_fmt(self.slopes)} "
            f"lower={_fmt(self.lower)} upper={_fmt(self.upper)}"
        )


def spl_fit(qs: QuantileSet, tail_family: TailFamily | str = TailFamily.NORMAL) -> SplineDistribution:
    """Monotone cubic spline CDF through the quantile pairs, with parametric tails.

    The CDF passes through every ``(q_k, p_k)``. Beyond the smallest and
    largest values a normal (or exponential) tail is matched to the two
    outermost pairs on that side, so the CDF is continuous at the ends and
    integrates to one. Tied values are collapsed to one knot at their mean
    probability, with a warning.
    """
    tails = TailFamily(tail_family)
    x, p = collapse_ties(qs.values, qs.probs)
    if x.size < 2:
        raise PreconditionError("the spline fit needs at least two distinct quantile values")
    if np.any(np.diff(x) <= 0):
        raise PreconditionError("quantile values must be increasing")
    slopes = fritsch_carlson_slopes(x, p)
    if tails is TailFamily.NORMAL:
        z = special.ndtri(p)
        s_lo = (x[1] - x[0]) / (z[1] - z[0])
        s_hi = (x[-1] - x[-2]) / (z[-1] - z[-2])
        lower = (float(x[0] - s_lo * z[0]), float(s_lo))
        upper = (float(x[-1] - s_hi * z[-1]), float(s_hi))
    else:
        rate_lo = math.log(p[1] / p[0]) / (x[1] - x[0])
        rate_hi = math.log((1.0 - p[-2]) / (1.0 - p[-1])) / (x[-1] - x[-2])
        lower, upper = (float(rate_lo), 0.0), (float(rate_hi), 0.0)
    return SplineDistribution(x, p, slopes, tails, lower, upper)


# ---------------------------------------------------------------------------
# KDE


def silverman_bandwidth(values) -> float:
    """Silverman's rule of thumb ``0.9 min(sd, IQR / 1.34) K^(-1/5)``.

    Degenerate spreads fall back to the sd, then ``|x_1|``, then 1.
    """
    v = np.asarray(values, dtype=float)
    sd = float(np.std(v, ddof=1))
    q75, q25 = np.quantile(v, [0.75, 0.25])
    lo = min(sd, float(q75 - q25) / 1.34)
    if lo <= 0:
        lo = sd or abs(float(v[0])) or 1.0
    return 0.9 * lo * v.size ** (-0.2)


@dataclass(frozen=True, eq=False)
class KdeDistribution(MatchedDistribution):
    """Equal-weight Gaussian kernels centred at the quantile values."""

    centers: np.ndarray
    bandwidth: float

    family: ClassVar[str] = "KDE"
    method: ClassVar[str] = "KDE"

    def __post_init__(self):
        c = np.array(self.centers, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)
        if not self.bandwidth > 0:
            raise PreconditionError("KDE bandwidth must be positive")
        k = c.size
        object.__setattr__(
            self, "_mixture", NormalMixture(np.full(k, 1.0 / k), c, np.full(k, float(self.bandwidth)))
        )

    @property
    def mixture(self) -> NormalMixture:
        return self._mixture  # type: ignore[attr-defined]

    def params(self) -> dict:
        return dict(centers=self.centers, bandwidth=self.bandwidth)

    def _cdf(self, x):
        return self.mixture._cdf(x)

    def _pdf(self, x):
        return self.mixture._pdf(x)

    def logpdf(self, x):
        return self.mixture.logpdf(x)

    def _quantile(self, p):
        return self.mixture._quantile(p)

    def _quantile_raw(self, p):
        return self.mixture._quantile_raw(p)

    def support(self) -> tuple[float, float]:
        return -math.inf, math.inf

    def to_text(self) -> str:
        return f"KDE bandwidth={float(self.bandwidth)!r} centers={_fmt(self.centers)}"


def kde_fit(qs: QuantileSet, bandwidth: float | None = None) -> KdeDistribution:
    """Gaussian KDE over the quantile values; Silverman bandwidth by default."""
    if len(qs) < 2:
        raise PreconditionError("the KDE fit needs at least two quantile values")
    if bandwidth is None:
        bandwidth = silverman_bandwidth(qs.values)
    elif not bandwidth > 0:
        raise PreconditionError("KDE bandwidth must be positive")
    return KdeDistribution(np.array(qs.values), float(bandwidth))


def parse_matched(text: str) -> MatchedDistribution:
    """Inverse of ``to_text`` for SPL and KDE fits."""
    parts = text.split()
    if not parts or parts[0] not in ("SPL", "KDE"):
        raise FormatError(f"not a matched-distribution text block: {text[:40]!r}")
    kv = {}
    for item in parts[1:]:
        m = re.fullmatch(r"(\w+)=(\S+)", item)
        if not m:
            raise FormatError(f"malformed field {item!r}")
        kv[m.group(1)] = m.group(2)
    try:
        if parts[0] == "KDE":
            return KdeDistribution(np.array([float(v) for v in kv["centers"].split(",")]), float(kv["bandwidth"]))
        vec = {k: np.array([float(v) for v in kv[k].split(",")]) for k in ("x", "p", "slopes", "lower", "upper")}
        return SplineDistribution(
            vec["x"], vec["p"], vec["slopes"], TailFamily(kv["tails"]), tuple(vec["lower"]), tuple(vec["upper"])
        )
    except (KeyError, ValueError) as exc:
        raise FormatError(f"incomplete or invalid matched-distribution text: {exc}") from None
