"""Continuous distribution families evaluated through CDF, PDF, QF and QDF.

Every family is a frozen dataclass whose parameters may be scalars or numpy
arrays. Arrays broadcast against the evaluation points, which lets the
samplers evaluate a whole batch of parameter draws in one call. Mixture
parameters carry the component index on their last axis.

Families with a closed-form quantile function but no closed-form CDF
(Tukey lambda, generalized lambda, metalog) obtain ``cdf`` and ``pdf`` by
monotone root finding on the quantile function, see :func:`cdf_numeric`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import ClassVar

import numpy as np
from scipy import special

from .errors import ConvergenceError, DomainError, FormatError, PreconditionError

__all__ = [
    "Distribution",
    "Normal",
    "Logistic",
    "Laplace",
    "ExtremeValue",
    "Exponential",
    "NormalMixture",
    "TukeyLambda",
    "GeneralizedLambda",
    "Metalog3",
    "LocationScale",
    "FAMILIES",
    "quantile",
    "qdf",
    "cdf_numeric",
    "sample",
    "parse_distribution",
    "format_distribution",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

NEWTON_TOL = 1e-12
MAX_ITER = 200


def _scalar_or_array(a):
    a = np.asarray(a, dtype=float)
    return float(a) if a.ndim == 0 else a


def check_probability(p) -> np.ndarray:
    """Return ``p`` as a float array, raising DomainError unless 0 < p < 1."""
    p = np.asarray(p, dtype=float)
    bad = ~((p > 0.0) & (p < 1.0))
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        raise DomainError(f"probability must lie in (0, 1); got {p[tuple(idx)]!r}")
    return p


class Distribution:
    """Interface shared by all families.

    Subclasses implement the private ``_cdf``, ``_pdf``, ``_quantile`` and
    ``_qdf`` hooks; the public methods add domain checks and unwrap 0-d
    results to floats.
    """

    family: ClassVar[str] = ""
    closed_form_cdf: ClassVar[bool] = True
    # names of the scalar/array parameters, in serialization order
    param_names: ClassVar[tuple[str, ...]] = ()

    def cdf(self, x):
        return _scalar_or_array(self._cdf(np.asarray(x, dtype=float)))

    def pdf(self, x):
        return _scalar_or_array(self._pdf(np.asarray(x, dtype=float)))

    def logpdf(self, x):
        with np.errstate(divide="ignore"):
            return _scalar_or_array(np.log(self._pdf(np.asarray(x, dtype=float))))

    def quantile(self, p):
        return _scalar_or_array(self._quantile(check_probability(p)))

    def qdf(self, p):
        return _scalar_or_array(self._qdf(check_probability(p)))

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``count`` values by the probability integral transform."""
        if count < 1:
            raise PreconditionError("sample count must be at least 1")
        u = rng.random(count)
        # Generator.random is on [0, 1); keep draws strictly inside the unit interval
        u = np.clip(u, 2.0**-60, 1.0 - 2.0**-53)
        return np.asarray(self._quantile(u), dtype=float)

    def support(self) -> tuple[float, float]:
        lo = self._quantile_raw(np.float64(0.0))
        hi = self._quantile_raw(np.float64(1.0))
        return float(np.min(lo)), float(np.max(hi))

    def params(self) -> dict:
        return {name: getattr(self, name) for name in self.param_names}

    # hooks -----------------------------------------------------------------
    def _cdf(self, x):
        return _invert_quantile(self, x)

    def _pdf(self, x):
        p = self._cdf(x)
        inside = (p > 0.0) & (p < 1.0)
        ps = np.where(inside, p, 0.5)
        with np.errstate(divide="ignore", invalid="ignore"):
            dens = 1.0 / self._qdf(ps)
        return np.where(inside, dens, 0.0)

    def _quantile(self, p):
        raise NotImplementedError

    def _quantile_raw(self, p):
        """Quantile function evaluated without the open-interval check."""
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return self._quantile(p)

    def _qdf(self, p):
        with np.errstate(divide="ignore"):
            return 1.0 / self._pdf(self._quantile(p))


def _as_param(obj, name, value):
    object.__setattr__(obj, name, _scalar_or_array(value))


# ---------------------------------------------------------------------------
# location-scale families


@dataclass(frozen=True, eq=False)
class _LocationScaleFamily(Distribution):
    mu: float = 0.0
    sigma: float = 1.0

    param_names: ClassVar[tuple[str, ...]] = ("mu", "sigma")

    def __post_init__(self):
        _as_param(self, "mu", self.mu)
        _as_param(self, "sigma", self.sigma)
        if not np.all(np.asarray(self.sigma) > 0):
            raise PreconditionError(f"{self.family}: scale sigma must be positive")

    def _z(self, x):
        return (x - self.mu) / self.sigma

    def _cdf(self, x):
        return self._std_cdf(self._z(x))

    def _pdf(self, x):
        return self._std_pdf(self._z(x)) / self.sigma

    def _quantile(self, p):
        return self.mu + self.sigma * self._std_quantile(p)

    def _qdf(self, p):
        return self.sigma * self._std_qdf(p)

    @staticmethod
    def _std_cdf(z):
        raise NotImplementedError

    @staticmethod
    def _std_pdf(z):
        raise NotImplementedError

    @staticmethod
    def _std_quantile(p):
        raise NotImplementedError

    @staticmethod
    def _std_qdf(p):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Normal(_LocationScaleFamily):
    family: ClassVar[str] = "Normal"

    @staticmethod
    def _std_cdf(z):
        return special.ndtr(z)

    @staticmethod
    def _std_pdf(z):
        return np.exp(-0.5 * z * z) / _SQRT_2PI

    @staticmethod
    def _std_quantile(p):
        return special.ndtri(p)

    @staticmethod
    def _std_qdf(p):
        z = special.ndtri(p)
        return _SQRT_2PI * np.exp(0.5 * z * z)

    def logpdf(self, x):
        z = self._z(np.asarray(x, dtype=float))
        return _scalar_or_array(-0.5 * z * z - _LOG_SQRT_2PI - np.log(self.sigma))


@dataclass(frozen=True, eq=False)
class Logistic(_LocationScaleFamily):
    family: ClassVar[str] = "Logistic"

    @staticmethod
    def _std_cdf(z):
        return special.expit(z)

    @staticmethod
    def _std_pdf(z):
        e = special.expit(z)
        return e * (1.0 - e)

    @staticmethod
    def _std_quantile(p):
        return special.logit(p)

    @staticmethod
    def _std_qdf(p):
        return 1.0 / (p * (1.0 - p))


@dataclass(frozen=True, eq=False)
class Laplace(_LocationScaleFamily):
    family: ClassVar[str] = "Laplace"

    @staticmethod
    def _std_cdf(z):
        with np.errstate(over="ignore"):
            return np.where(z < 0, 0.5 * np.exp(np.minimum(z, 0.0)), 1.0 - 0.5 * np.exp(-np.maximum(z, 0.0)))

    @staticmethod
    def _std_pdf(z):
        return 0.5 * np.exp(-np.abs(z))

    @staticmethod
    def _std_quantile(p):
        with np.errstate(divide="ignore"):
            return np.where(p < 0.5, np.log(2.0 * p), -np.log(2.0 * (1.0 - p)))

    @staticmethod
    def _std_qdf(p):
        return np.where(p < 0.5, 1.0 / p, 1.0 / (1.0 - p))


@dataclass(frozen=True, eq=False)
class ExtremeValue(_LocationScaleFamily):
    """Gumbel (largest extreme value) distribution."""

    family: ClassVar[str] = "ExtremeValue"

    @staticmethod
    def _std_cdf(z):
        with np.errstate(over="ignore"):
            return np.exp(-np.exp(-z))

    @staticmethod
    def _std_pdf(z):
        with np.errstate(over="ignore", invalid="ignore"):
            e = np.exp(-z)
            out = e * np.exp(-e)
        return np.where(np.isfinite(out), out, 0.0)

    @staticmethod
    def _std_quantile(p):
        with np.errstate(divide="ignore"):
            return -np.log(-np.log(p))

    @staticmethod
    def _std_qdf(p):
        return -1.0 / (p * np.log(p))


@dataclass(frozen=True, eq=False)
class Exponential(Distribution):
    rate: float = 1.0

    family: ClassVar[str] = "Exponential"
    param_names: ClassVar[tuple[str, ...]] = ("rate",)

    def __post_init__(self):
        _as_param(self, "rate", self.rate)
        if not np.all(np.asarray(self.rate) > 0):
            raise PreconditionError("Exponential: rate must be positive")

    def _cdf(self, x):
        return np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)

    def _pdf(self, x):
        return np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)

    def _quantile(self, p):
        return -np.log1p(-p) / self.rate

    def _qdf(self, p):
        return 1.0 / (self.rate * (1.0 - p))


# ---------------------------------------------------------------------------
# finite normal mixture


@dataclass(frozen=True, eq=False)
class NormalMixture(Distribution):
    """Finite mixture of normals; component index on the last parameter axis."""

    weights: np.ndarray = field(default_factory=lambda: np.array([1.0]))
    means: np.ndarray = field(default_factory=lambda: np.array([0.0]))
    sds: np.ndarray = field(default_factory=lambda: np.array([1.0]))

    family: ClassVar[str] = "NormalMixture"
    param_names: ClassVar[tuple[str, ...]] = ("weights", "means", "sds")

    def __post_init__(self):
        for name in self.param_names:
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        w, m, s = self.weights, self.means, self.sds
        if not (w.shape[-1] == m.shape[-1] == s.shape[-1]):
            raise PreconditionError("NormalMixture: weights, means and sds need the same component count")
        if np.any(s <= 0):
            raise PreconditionError("NormalMixture: component sds must be positive")
        if np.any(w < 0) or np.any(np.abs(w.sum(axis=-1) - 1.0) > 1e-12):
            raise PreconditionError("NormalMixture: weights must be nonnegative and sum to 1")

    @property
    def components(self) -> int:
        return self.weights.shape[-1]

    def _cdf(self, x):
        z = (x[..., None] - self.means) / self.sds
        return np.sum(self.weights * special.ndtr(z), axis=-1)

    def _pdf(self, x):
        z = (x[..., None] - self.means) / self.sds
        return np.sum(self.weights * np.exp(-0.5 * z * z) / (_SQRT_2PI * self.sds), axis=-1)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x[..., None] - self.means) / self.sds
        with np.errstate(divide="ignore"):
            terms = np.log(self.weights) - 0.5 * z * z - _LOG_SQRT_2PI - np.log(self.sds)
        return _scalar_or_array(special.logsumexp(terms, axis=-1))

    def _quantile(self, p):
        lo = np.min(self.means - 40.0 * self.sds, axis=-1)
        hi = np.max(self.means + 40.0 * self.sds, axis=-1)
        return _invert_cdf(self, p, lo, hi)

    def _quantile_raw(self, p):
        p = np.asarray(p, dtype=float)
        interior = (p > 0.0) & (p < 1.0)
        q = self._quantile(np.where(interior, p, 0.5))
        return np.where(p <= 0.0, -np.inf, np.where(p >= 1.0, np.inf, q))


# ---------------------------------------------------------------------------
# quantile-defined families


@dataclass(frozen=True, eq=False)
class TukeyLambda(Distribution):
    lam: float = 0.0

    family: ClassVar[str] = "TukeyLambda"
    closed_form_cdf: ClassVar[bool] = False
    param_names: ClassVar[tuple[str, ...]] = ("lam",)

    def __post_init__(self):
        _as_param(self, "lam", self.lam)
        if not np.all(np.isfinite(self.lam)):
            raise PreconditionError("TukeyLambda: lambda must be finite")

    def _quantile(self, p):
        return tukey_lambda_quantile(p, self.lam)

    def _qdf(self, p):
        lam = self.lam
        return p ** (lam - 1.0) + (1.0 - p) ** (lam - 1.0)


def tukey_lambda_quantile(p, lam):
    """Tukey lambda quantile, stable as lambda approaches 0.

    Written as ``(expm1(lam log p) - expm1(lam log(1-p))) / lam`` so the
    logistic limit at ``lam == 0`` is continuous.
    """
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        a = np.log(p)
        b = np.log1p(-p)
        lam = np.asarray(lam, dtype=float)
        # second-order series near 0, where the quotient loses precision
        small = np.abs(lam) < 1e-12
        safe = np.where(small, 1.0, lam)
        general = (np.expm1(safe * a) - np.expm1(safe * b)) / safe
        return np.where(small, a - b + 0.5 * lam * (a * a - b * b), general)


@dataclass(frozen=True, eq=False)
class GeneralizedLambda(Distribution):
    """Ramberg-Schmeiser generalized lambda distribution.

    ``Q(p) = l1 + (p**l3 - (1 - p)**l4) / l2``.
    """

    l1: float = 0.0
    l2: float = 1.0
    l3: float = 0.14
    l4: float = 0.14

    family: ClassVar[str] = "GeneralizedLambda"
    closed_form_cdf: ClassVar[bool] = False
    param_names: ClassVar[tuple[str, ...]] = ("l1", "l2", "l3", "l4")

    def __post_init__(self):
        for name in self.param_names:
            _as_param(self, name, getattr(self, name))
        if not np.all(gld_valid(self.l2, self.l3, self.l4)):
            raise PreconditionError(
                f"GeneralizedLambda: parameters (l2={self.l2}, l3={self.l3}, l4={self.l4}) "
                "do not define a valid distribution"
            )

    def _quantile(self, p):
        return self.l1 + (p**self.l3 - (1.0 - p) ** self.l4) / self.l2

    def _quantile_raw(self, p):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = self._quantile(p)
        # 0**negative is inf and 0**0 is 1; both already give the right limits
        return out

    def _qdf(self, p):
        return (self.l3 * p ** (self.l3 - 1.0) + self.l4 * (1.0 - p) ** (self.l4 - 1.0)) / self.l2


_GLD_CHECK_GRID = np.concatenate(
    [np.geomspace(1e-8, 0.01, 200), np.linspace(0.01, 0.99, 400), 1.0 - np.geomspace(0.01, 1e-8, 200)]
)


def gld_valid(l2, l3, l4) -> np.ndarray:
    """Elementwise validity of RS generalized lambda parameters.

    Regions with ``l3, l4`` of equal sign are decided analytically; any other
    combination is accepted only if the quantile density stays positive on a
    dense probability grid.
    """
    shape = np.broadcast(*(np.asarray(v) for v in (l2, l3, l4))).shape
    l2, l3, l4 = (np.broadcast_to(np.asarray(v, dtype=float), shape).reshape(-1) for v in (l2, l3, l4))
    finite = np.isfinite(l2) & np.isfinite(l3) & np.isfinite(l4) & (l2 != 0)
    pos = (l2 > 0) & (l3 >= 0) & (l4 >= 0) & ~((l3 == 0) & (l4 == 0))
    neg = (l2 < 0) & (l3 <= 0) & (l4 <= 0) & ~((l3 == 0) & (l4 == 0))
    ok = finite & (pos | neg)
    other = finite & ~ok & ((l3 * l4) < 0)
    if np.any(other):
        g = _GLD_CHECK_GRID
        idx = np.nonzero(other)
        a, b, c = l2[idx][:, None], l3[idx][:, None], l4[idx][:, None]
        with np.errstate(over="ignore", invalid="ignore"):
            dens = (b * g ** (b - 1.0) + c * (1.0 - g) ** (c - 1.0)) / a
        ok = ok.copy()
        ok[idx] = np.all(dens > 0, axis=1)
    return ok.reshape(shape)


@dataclass(frozen=True, eq=False)
class Metalog3(Distribution):
    """Three-term metalog, ``Q(p) = a1 + a3 (p - 1/2) + a2 log(p / (1 - p))``."""

    a1: float = 0.0
    a2: float = 1.0
    a3: float = 0.0

    family: ClassVar[str] = "Metalog3"
    closed_form_cdf: ClassVar[bool] = False
    param_names: ClassVar[tuple[str, ...]] = ("a1", "a2", "a3")

    def __post_init__(self):
        for name in self.param_names:
            _as_param(self, name, getattr(self, name))
        if not np.all(np.asarray(self.a2) > 0):
            raise PreconditionError("Metalog3: a2 must be positive")
        # the QDF a3 + a2 / (p(1-p)) is smallest at p = 1/2
        if not np.all(np.asarray(self.a3) > -4.0 * np.asarray(self.a2)):
            raise PreconditionError("Metalog3: a3 must exceed -4*a2 for a nondecreasing quantile function")

    def _quantile(self, p):
        return self.a1 + self.a3 * (p - 0.5) + self.a2 * special.logit(p)

    def _qdf(self, p):
        return self.a3 + self.a2 / (p * (1.0 - p))


@dataclass(frozen=True, eq=False)
class LocationScale(Distribution):
    """``loc + scale * X`` for a base distribution X."""

    base: Distribution = field(default_factory=TukeyLambda)
    loc: float = 0.0
    scale: float = 1.0

    family: ClassVar[str] = "LocationScale"
    param_names: ClassVar[tuple[str, ...]] = ("loc", "scale")

    def __post_init__(self):
        _as_param(self, "loc", self.loc)
        _as_param(self, "scale", self.scale)
        if not np.all(np.asarray(self.scale) > 0):
            raise PreconditionError("LocationScale: scale must be positive")

    @property
    def closed_form_cdf(self):  # type: ignore[override]
        return self.base.closed_form_cdf

    def _cdf(self, x):
        return self.base._cdf((x - self.loc) / self.scale)

    def _pdf(self, x):
        return self.base._pdf((x - self.loc) / self.scale) / self.scale

    def _quantile(self, p):
        return self.loc + self.scale * self.base._quantile(p)

    def _quantile_raw(self, p):
        return self.loc + self.scale * self.base._quantile_raw(p)

    def _qdf(self, p):
        return self.scale * self.base._qdf(p)

    def params(self) -> dict:
        out = {"loc": self.loc, "scale": self.scale}
        out.update({f"base.{k}": v for k, v in self.base.params().items()})
        return out


FAMILIES: dict[str, type[Distribution]] = {
    cls.family: cls
    for cls in (
        Normal,
        Logistic,
        Laplace,
        ExtremeValue,
        Exponential,
        NormalMixture,
        TukeyLambda,
        GeneralizedLambda,
        Metalog3,
    )
}

LOCATION_SCALE_FAMILIES = ("Normal", "Logistic", "Laplace", "ExtremeValue")


# ---------------------------------------------------------------------------
# numeric inversion


def _invert_quantile(dist: Distribution, x, tol: float = NEWTON_TOL, max_iter: int = MAX_ITER):
    """Solve ``Q(p) = x`` for p by bisection followed by safeguarded Newton."""
    x = np.asarray(x, dtype=float)
    q_lo = np.asarray(dist._quantile_raw(np.float64(0.0)))
    q_hi = np.asarray(dist._quantile_raw(np.float64(1.0)))
    shape = np.broadcast(x, dist._quantile_raw(np.float64(0.5))).shape
    x = np.broadcast_to(x, shape)
    below = x <= q_lo
    above = x >= q_hi
    lo = np.zeros(shape)
    hi = np.ones(shape)
    p = np.full(shape, 0.5)
    nan = np.isnan(x)
    active = ~(below | above | nan)

    def resid(pp):
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            return dist._quantile(pp) - x

    # bisection first: the bracket shrinks to 2**-30 before Newton takes over
    for _ in range(30):
        r = resid(p)
        lo = np.where(active & (r < 0), p, lo)
        hi = np.where(active & (r >= 0), p, hi)
        p = 0.5 * (lo + hi)
    converged = ~active
    for _ in range(max_iter - 30):
        r = resid(p)
        # F(x) matches p to machine resolution; Newton can only oscillate from here
        exact = np.abs(r) <= 4.0 * np.finfo(float).eps * p
        lo = np.where(r < 0, p, lo)
        hi = np.where(r > 0, p, hi)
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            p_new = p - r / dist._qdf(p)
        bad = ~np.isfinite(p_new) | (p_new < lo) | (p_new > hi)
        p_new = np.where(bad, 0.5 * (lo + hi), p_new)
        p_new = np.where(exact | converged, p, p_new)
        converged = converged | exact | (np.abs(p_new - p) < tol)
        p = p_new
        if np.all(converged):
            break
    else:
        raise ConvergenceError(f"{dist.family}: numeric CDF inversion did not converge")
    out = np.where(below, 0.0, np.where(above, 1.0, p))
    return np.where(nan, np.nan, out)


def _invert_cdf(dist: Distribution, p, lo, hi, max_iter: int = MAX_ITER):
    """Solve ``F(x) = p`` for x inside the bracket [lo, hi]."""
    p = np.asarray(p, dtype=float)
    shape = np.broadcast(p, lo).shape
    p = np.broadcast_to(p, shape)
    lo = np.broadcast_to(lo, shape).astype(float)
    hi = np.broadcast_to(hi, shape).astype(float)
    scale = hi - lo
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        r = dist._cdf(x) - p
        lo = np.where(r < 0, x, lo)
        hi = np.where(r >= 0, x, hi)
        x = 0.5 * (lo + hi)
        if np.all(hi - lo < 1e-4 * scale):
            break
    converged = np.zeros(shape, dtype=bool)
    for _ in range(max_iter):
        r = dist._cdf(x) - p
        # F(x) matches p to machine resolution; Newton can only oscillate from here
        exact = np.abs(r) <= 4.0 * np.finfo(float).eps * p
        lo = np.where(r < 0, x, lo)
        hi = np.where(r > 0, x, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_new = x - r / dist._pdf(x)
        bad = ~np.isfinite(x_new) | (x_new < lo) | (x_new > hi)
        x_new = np.where(bad, 0.5 * (lo + hi), x_new)
        x_new = np.where(exact | converged, x, x_new)
        converged = converged | exact | (np.abs(x_new - x) <= 1e-13 * (1.0 + np.abs(x)))
        x = x_new
        if np.all(converged):
            break
    else:
        raise ConvergenceError(f"{dist.family}: quantile bracket search did not converge")
    # a bracket that missed the root collapses onto one of its ends
    if np.any(np.abs(dist._cdf(x) - p) > 1e-10):
        raise ConvergenceError(f"{dist.family}: quantile bracket does not contain the solution")
    return x


# ---------------------------------------------------------------------------
# functional interface


def quantile(dist: Distribution, p):
    """Quantile function ``Q(p)`` for p in (0, 1)."""
    return dist.quantile(p)


def qdf(dist: Distribution, p):
    """Quantile density ``dQ/dp`` for p in (0, 1)."""
    return dist.qdf(p)


def cdf_numeric(dist: Distribution, x):
    """CDF by monotone root finding on the quantile function.

    Works for every family; returns 0 or 1 when ``x`` lies outside the image
    of the quantile function.
    """
    return _scalar_or_array(_invert_quantile(dist, np.asarray(x, dtype=float)))


def sample(dist: Distribution, count: int, seed: int | np.random.Generator | None = None) -> np.ndarray:
    """Draw ``count`` values from ``dist`` by inverse-transform sampling."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return dist.sample(count, rng)


# ---------------------------------------------------------------------------
# text representation: "Family key=value key=v1,v2"


def _fmt(v) -> str:
    a = np.asarray(v, dtype=float)
    if a.ndim == 0:
        return repr(float(a))
    return ",".join(repr(float(t)) for t in a.ravel())


def format_distribution(dist: Distribution) -> str:
    """Serialize a distribution to its one-line key-value form."""
    if isinstance(dist, LocationScale):
        inner = format_distribution(dist.base).split()
        parts = [f"base={inner[0]}"] + [f"base.{kv}" for kv in inner[1:]]
        return " ".join(["LocationScale", f"loc={_fmt(dist.loc)}", f"scale={_fmt(dist.scale)}", *parts])
    return " ".join([dist.family] + [f"{k}={_fmt(v)}" for k, v in dist.params().items()])


def parse_distribution(text: str) -> Distribution:
    """Parse the output of :func:`format_distribution`.

    Examples
    --------
    >>> parse_distribution("Normal mu=4 sigma=3.5").quantile(0.5)
    4.0
    """
    tokens = text.replace(";", " ").split()
    if not tokens:
        raise FormatError("empty distribution text")
    name, rest = tokens[0], tokens[1:]
    kv = {}
    for tok in rest:
        if "=" not in tok:
            raise FormatError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        kv[k.strip()] = v.strip()
    try:
        if name == "LocationScale":
            base_name = kv.pop("base")
            base_kv = " ".join(f"{k[5:]}={v}" for k, v in kv.items() if k.startswith("base."))
            base = parse_distribution(f"{base_name} {base_kv}")
            return LocationScale(base, float(kv["loc"]), float(kv["scale"]))
        if name not in FAMILIES:
            raise FormatError(f"unknown distribution family {name!r}")
        cls = FAMILIES[name]
        args = {}
        for f in fields(cls):
            if f.name in kv:
                vals = [float(s) for s in kv.pop(f.name).split(",")]
                args[f.name] = np.array(vals) if (cls is NormalMixture or len(vals) > 1) else vals[0]
    except (KeyError, ValueError) as exc:
        raise FormatError(f"cannot parse distribution {text!r}: {exc}") from None
    if kv:
        raise FormatError(f"{name}: unknown parameters {sorted(kv)}")
    return cls(**args)
