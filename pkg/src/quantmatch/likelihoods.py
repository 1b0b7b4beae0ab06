"""Log-likelihoods of the quantile matching models and their priors.

Five models are provided:

``QGP_QF``
    ``Q_hat ~ N(Q_theta(p), Gamma o q_theta q_theta^T / n)``, only the quantile
    function and its density are evaluated.
``QGP_PIT``
    ``F_theta(Q_hat) ~ N(p, Gamma / n)``, only the CDF is evaluated.
``QGP_NORMAL``
    The normal special case of ``QGP_QF``, ``N(mu + sigma z, sigma^2 Psi / n)``.
``IND``
    ``F_theta(Q_hat(p_k)) ~ N(p_k, sigma_rho^2)`` independently.
``ORD``
    Joint density of the order statistics matched to the levels.

All log-likelihoods broadcast: distribution parameters may carry leading
batch axes (with a trailing singleton for the quantile axis) and values may
have shape ``(..., K)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import special

from .distributions import (
    FAMILIES,
    LOCATION_SCALE_FAMILIES,
    Distribution,
    GeneralizedLambda,
    LocationScale,
    Metalog3,
    Normal,
    NormalMixture,
    TukeyLambda,
    gld_valid,
)
from .empirical import ProbabilityGrid, QuantileSet, brownian_bridge_cov, cholesky
from .errors import DomainError, FormatError, PreconditionError

__all__ = [
    "ModelKind",
    "NormalPrior",
    "HalfNormalPrior",
    "DirichletPrior",
    "PriorSpec",
    "ModelSpec",
    "Parameter",
    "psi_matrix",
    "order_indices",
    "loglik_qgp_normal",
    "loglik_qgp_pit",
    "loglik_qgp_qf",
    "loglik_ind",
    "loglik_ord",
    "log_prior",
    "parse_prior",
]

_LOG_2PI = math.log(2.0 * math.pi)


class ModelKind(str, Enum):
    QGP_QF = "QGP_QF"
    QGP_PIT = "QGP_PIT"
    QGP_NORMAL = "QGP_NORMAL"
    IND = "IND"
    ORD = "ORD"


# ---------------------------------------------------------------------------
# priors


@dataclass(frozen=True)
class NormalPrior:
    mean: float
    sd: float

    def __post_init__(self):
        if not self.sd > 0:
            raise PreconditionError("normal prior sd must be positive")

    def logpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.sd
        return -0.5 * z * z - math.log(self.sd) - 0.5 * _LOG_2PI

    def __str__(self) -> str:
        return f"normal({self.mean!r}, {self.sd!r})"


@dataclass(frozen=True)
class HalfNormalPrior:
    """Normal(0, sd) truncated below at zero."""

    sd: float

    def __post_init__(self):
        if not self.sd > 0:
            raise PreconditionError("half-normal prior sd must be positive")

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        z = x / self.sd
        val = math.log(2.0) - 0.5 * z * z - math.log(self.sd) - 0.5 * _LOG_2PI
        return np.where(x > 0, val, -np.inf)

    def __str__(self) -> str:
        return f"halfnormal({self.sd!r})"


@dataclass(frozen=True)
class DirichletPrior:
    alpha: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        if not self.alpha or any(a <= 0 for a in self.alpha):
            raise PreconditionError("Dirichlet concentrations must be positive")

    def logpdf(self, w):
        w = np.asarray(w, dtype=float)
        a = np.asarray(self.alpha)
        if w.shape[-1] != a.size:
            raise PreconditionError(f"Dirichlet of dimension {a.size} evaluated at {w.shape[-1]} weights")
        norm = special.gammaln(a.sum()) - special.gammaln(a).sum()
        valid = np.all(w >= 0, axis=-1) & (np.abs(w.sum(axis=-1) - 1.0) < 1e-9)
        with np.errstate(divide="ignore", invalid="ignore"):
            body = np.sum(np.where(a == 1.0, 0.0, (a - 1.0) * np.log(w)), axis=-1)
        return np.where(valid, norm + body, -np.inf)

    def __str__(self) -> str:
        return "dirichlet(" + ", ".join(repr(a) for a in self.alpha) + ")"


Prior = NormalPrior | HalfNormalPrior | DirichletPrior


def parse_prior(text: str) -> Prior:
    """Parse ``normal(m, s)``, ``halfnormal(s)`` or ``dirichlet(a1, ..., aC)``."""
    m = re.fullmatch(r"\s*(\w+)\s*\((.*)\)\s*", text)
    if not m:
        raise FormatError(f"cannot parse prior {text!r}")
    name = m.group(1).lower().replace("_", "").replace("-", "")
    try:
        args = [float(a) for a in m.group(2).split(",") if a.strip()]
    except ValueError:
        raise FormatError(f"non-numeric prior arguments in {text!r}") from None
    if name == "normal" and len(args) == 2:
        return NormalPrior(*args)
    if name == "halfnormal" and len(args) == 1:
        return HalfNormalPrior(args[0])
    if name == "dirichlet" and args:
        return DirichletPrior(tuple(args))
    raise FormatError(f"unknown prior {text!r}")


@dataclass(frozen=True)
class PriorSpec:
    """Priors keyed by parameter group (``mu``, ``sigma``, ``w``, ``n``, ...)."""

    priors: dict[str, Prior] = field(default_factory=dict)

    def __getitem__(self, group: str) -> Prior:
        return self.priors[group]

    def __contains__(self, group: str) -> bool:
        return group in self.priors

    def with_defaults(self, defaults: dict[str, Prior]) -> PriorSpec:
        merged = dict(defaults)
        merged.update(self.priors)
        return PriorSpec(merged)

    def to_lines(self) -> list[str]:
        return [f"{k} = {v}" for k, v in self.priors.items()]


# ---------------------------------------------------------------------------
# model specification and parameter layout


@dataclass(frozen=True)
class Parameter:
    """One model parameter: ``kind`` is ``real``, ``positive`` or ``simplex``."""

    name: str
    group: str
    kind: str
    size: int = 1


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    family: str
    n_known: bool = True
    n: float | None = None
    components: int = 1
    priors: PriorSpec = field(default_factory=PriorSpec)

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.family not in FAMILIES:
            raise PreconditionError(f"unknown family {self.family!r}")
        cls = FAMILIES[self.family]
        if self.kind is ModelKind.QGP_NORMAL and self.family != "Normal":
            raise PreconditionError("QGP_NORMAL requires the Normal family")
        if self.kind is ModelKind.QGP_QF and cls is NormalMixture:
            raise PreconditionError("QGP_QF requires a family with an analytic quantile function and QDF")
        if self.components < 1:
            raise PreconditionError("mixture component count must be at least 1")
        if self.family != "NormalMixture" and self.components != 1:
            raise PreconditionError("components applies only to NormalMixture")
        if self.n is not None and not self.n > 0:
            raise PreconditionError("known sample size must be positive")
        object.__setattr__(self, "priors", self.priors.with_defaults(self.default_priors()))

    @property
    def uses_n(self) -> bool:
        return self.kind is not ModelKind.IND

    @property
    def estimates_n(self) -> bool:
        return self.uses_n and not self.n_known

    def parameters(self) -> list[Parameter]:
        out = family_parameters(self.family, self.components)
        if self.estimates_n:
            out.append(Parameter("n", "n", "positive"))
        if self.kind is ModelKind.IND:
            # nu = 1 / sigma_rho
            out.append(Parameter("nu", "nu", "positive"))
        return out

    def default_priors(self) -> dict[str, Prior]:
        d: dict[str, Prior] = {
            "mu": NormalPrior(5.0, 7.0),
            "sigma": HalfNormalPrior(6.0),
            "rate": HalfNormalPrior(6.0),
            "lam": NormalPrior(0.0, 1.0),
            "l1": NormalPrior(5.0, 7.0),
            "l2": HalfNormalPrior(6.0),
            "l3": NormalPrior(0.0, 1.0),
            "l4": NormalPrior(0.0, 1.0),
            "a1": NormalPrior(5.0, 7.0),
            "a2": HalfNormalPrior(6.0),
            "a3": NormalPrior(0.0, 7.0),
            "n": HalfNormalPrior(3000.0),
            "nu": HalfNormalPrior(3000.0),
        }
        if self.family == "NormalMixture":
            d["w"] = DirichletPrior((1.0,) * self.components)
        return d

    def distribution(self, theta: dict[str, np.ndarray], trailing: int = 0) -> Distribution:
        return build_distribution(self.family, theta, self.components, trailing)

    def valid(self, theta: dict[str, np.ndarray]) -> np.ndarray | bool:
        return family_valid(self.family, theta)


def family_parameters(family: str, components: int = 1) -> list[Parameter]:
    """Parameters of a family as fitted by the samplers and least squares.

    Tukey lambda is fitted with an added location ``mu`` and scale ``sigma``.
    """
    C = components
    if family in LOCATION_SCALE_FAMILIES:
        return [Parameter("mu", "mu", "real"), Parameter("sigma", "sigma", "positive")]
    if family == "Exponential":
        return [Parameter("rate", "rate", "positive")]
    if family == "NormalMixture":
        out = [Parameter(f"mu[{c + 1}]", "mu", "real") for c in range(C)]
        out += [Parameter(f"sigma[{c + 1}]", "sigma", "positive") for c in range(C)]
        out.append(Parameter("w", "w", "simplex", C))
        return out
    if family == "TukeyLambda":
        return [Parameter("mu", "mu", "real"), Parameter("sigma", "sigma", "positive"), Parameter("lam", "lam", "real")]
    if family == "GeneralizedLambda":
        return [
            Parameter("l1", "l1", "real"),
            Parameter("l2", "l2", "positive"),
            Parameter("l3", "l3", "real"),
            Parameter("l4", "l4", "real"),
        ]
    if family == "Metalog3":
        return [Parameter("a1", "a1", "real"), Parameter("a2", "a2", "positive"), Parameter("a3", "a3", "real")]
    raise PreconditionError(f"unknown family {family!r}")


def family_valid(family: str, theta: dict[str, np.ndarray]) -> np.ndarray | bool:
    """Constraints not enforced by the unconstrained reparameterization."""
    if family == "GeneralizedLambda":
        return gld_valid(theta["l2"], theta["l3"], theta["l4"])
    if family == "Metalog3":
        return np.asarray(theta["a3"]) > -4.0 * np.asarray(theta["a2"])
    return True


def build_distribution(family: str, theta: dict[str, np.ndarray], components: int = 1, trailing: int = 0) -> Distribution:
    """Build the (possibly batched) distribution for parameter values.

    ``trailing`` singleton axes are appended to each scalar parameter so
    that it broadcasts against values of shape ``(..., K)``.
    """

    def s(a):
        a = np.asarray(a, dtype=float)
        return a.reshape(a.shape + (1,) * trailing)

    if family in LOCATION_SCALE_FAMILIES:
        return FAMILIES[family](s(theta["mu"]), s(theta["sigma"]))
    if family == "Exponential":
        return FAMILIES[family](s(theta["rate"]))
    if family == "NormalMixture":
        C = components
        m = np.stack([np.asarray(theta[f"mu[{c + 1}]"], dtype=float) for c in range(C)], axis=-1)
        sd = np.stack([np.asarray(theta[f"sigma[{c + 1}]"], dtype=float) for c in range(C)], axis=-1)
        w = np.asarray(theta["w"], dtype=float)

        def sc(a):
            return a.reshape(a.shape[:-1] + (1,) * trailing + a.shape[-1:])

        return NormalMixture(sc(w), sc(m), sc(sd))
    if family == "TukeyLambda":
        return LocationScale(TukeyLambda(s(theta["lam"])), s(theta["mu"]), s(theta["sigma"]))
    if family == "GeneralizedLambda":
        return GeneralizedLambda(s(theta["l1"]), s(theta["l2"]), s(theta["l3"]), s(theta["l4"]))
    if family == "Metalog3":
        return Metalog3(s(theta["a1"]), s(theta["a2"]), s(theta["a3"]))
    raise PreconditionError(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# grid-dependent factors (theta-free, cached)


@dataclass(frozen=True, eq=False)
class GridFactors:
    probs: np.ndarray
    gamma: np.ndarray
    chol: np.ndarray
    inv_chol: np.ndarray
    logdet: float
    z: np.ndarray
    normal_qdf: np.ndarray


@lru_cache(maxsize=128)
def _factors_cached(key: bytes) -> GridFactors:
    p = np.frombuffer(key, dtype=float).copy()
    gamma = brownian_bridge_cov(p)
    L = cholesky(gamma)
    inv = np.linalg.solve(L, np.eye(p.size))
    z = special.ndtri(p)
    return GridFactors(
        probs=p,
        gamma=gamma,
        chol=L,
        inv_chol=inv,
        logdet=float(2.0 * np.sum(np.log(np.diag(L)))),
        z=z,
        normal_qdf=math.sqrt(2.0 * math.pi) * np.exp(0.5 * z * z),
    )


def grid_factors(grid: ProbabilityGrid | np.ndarray) -> GridFactors:
    p = grid.probs if isinstance(grid, ProbabilityGrid) else np.asarray(grid, dtype=float)
    return _factors_cached(np.ascontiguousarray(p, dtype=float).tobytes())


def _mvn_logpdf_scaled(resid, scale, n, gf: GridFactors):
    """Log density of ``resid ~ N(0, diag(scale) Gamma diag(scale) / n)``.

    The covariance factor is ``diag(scale) L / sqrt(n)`` with ``L`` the cached
    Cholesky factor of Gamma, so no per-call factorization is needed.
    """
    K = gf.probs.size
    scale = np.broadcast_to(scale, np.broadcast(resid, scale).shape)
    n = np.asarray(n, dtype=float)
    w = np.einsum("...k,jk->...j", resid / scale, gf.inv_chol)
    quad = np.einsum("...j,...j->...", w, w) * n
    logdet = gf.logdet + 2.0 * np.sum(np.log(scale), axis=-1) - K * np.log(n)
    return -0.5 * (K * _LOG_2PI + logdet + quad)


def psi_matrix(grid: ProbabilityGrid | np.ndarray) -> np.ndarray:
    """Known covariance of the normal QGP, ``2 pi Gamma_ij exp((z_i^2 + z_j^2) / 2)``."""
    gf = grid_factors(grid)
    return gf.gamma * np.outer(gf.normal_qdf, gf.normal_qdf)


# ---------------------------------------------------------------------------
# log-likelihoods, internal batched forms


def _ll_qgp_normal(mu, sigma, n, values, gf):
    mu = np.asarray(mu, dtype=float)[..., None]
    sigma = np.asarray(sigma, dtype=float)[..., None]
    resid = values - (mu + sigma * gf.z)
    return _mvn_logpdf_scaled(resid, sigma * gf.normal_qdf, n, gf)


def _ll_qgp_qf(dist, n, values, gf):
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        mean = dist._quantile(gf.probs)
        scale = dist._qdf(gf.probs)
    ok = np.all(np.isfinite(mean) & np.isfinite(scale) & (scale > 0), axis=-1)
    if not np.all(ok):
        mean = np.where(ok[..., None], mean, 0.0)
        scale = np.where(ok[..., None], scale, 1.0)
        return np.where(ok, _mvn_logpdf_scaled(values - mean, scale, n, gf), -np.inf)
    return _mvn_logpdf_scaled(values - mean, scale, n, gf)


def _pit(dist, values):
    u = dist._cdf(values)
    ok = np.all((u > 0) & (u < 1), axis=-1)
    return u, ok


def _ll_qgp_pit(dist, n, values, gf):
    u, ok = _pit(dist, values)
    ll = _mvn_logpdf_scaled(u - gf.probs, 1.0, n, gf)
    return np.where(ok, ll, -np.inf)


def _ll_ind(dist, sigma_rho, values, gf):
    u, ok = _pit(dist, values)
    sr = np.asarray(sigma_rho, dtype=float)[..., None]
    z = (u - gf.probs) / sr
    ll = np.sum(-0.5 * z * z - np.log(sr) - 0.5 * _LOG_2PI, axis=-1)
    return np.where(ok, ll, -np.inf)


def order_indices(probs, n) -> np.ndarray:
    """Order-statistic index ``round(p (n - 1)) + 1`` for each level (1-based).

    ``n`` may be an array (one sample size per batch element); halves round up.
    """
    n = np.asarray(n, dtype=float)
    n = np.floor(n + 0.5)
    return (np.floor(np.asarray(probs) * (n[..., None] - 1.0) + 0.5) + 1.0).astype(np.int64)


def _ll_ord(dist, n, values, gf):
    n = np.floor(np.asarray(n, dtype=float) + 0.5)
    j = order_indices(gf.probs, n)
    nb = n[..., None]
    jj = np.concatenate([np.zeros_like(j[..., :1]), j, np.broadcast_to(nb + 1, j[..., :1].shape).astype(np.int64)], axis=-1)
    gaps = np.diff(jj, axis=-1) - 1
    index_ok = np.all(gaps >= 0, axis=-1) & (j[..., 0] >= 1) & (j[..., -1] <= n)

    F = dist._cdf(values)
    shape = np.broadcast(F, gaps[..., 1:]).shape
    F = np.broadcast_to(F, shape)
    Fe = np.concatenate([np.zeros(shape[:-1] + (1,)), F, np.ones(shape[:-1] + (1,))], axis=-1)
    dF = np.diff(Fe, axis=-1)
    gaps = np.broadcast_to(gaps, dF.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        logdF = np.log(dF)
        body = np.where(gaps > 0, gaps * logdF, 0.0)
        logf = np.log(dist._pdf(values))
    ll = (
        special.gammaln(n + 1.0)
        + np.sum(body - special.gammaln(gaps + 1.0), axis=-1)
        + np.sum(np.broadcast_to(logf, shape), axis=-1)
    )
    ll = np.where(np.isnan(ll), -np.inf, ll)
    return np.where(index_ok, ll, -np.inf)


# ---------------------------------------------------------------------------
# public scalar forms


def _as_output(ll):
    ll = np.asarray(ll, dtype=float)
    return float(ll) if ll.ndim == 0 else ll


def loglik_qgp_normal(mu, sigma, n, qs: QuantileSet):
    """Normal QGP: ``Q_hat ~ N(mu + sigma Phi^-1(p), sigma^2 Psi / n)``."""
    if np.any(np.asarray(sigma) <= 0):
        raise PreconditionError("sigma must be positive")
    if np.any(np.asarray(n) <= 0):
        raise PreconditionError("n must be positive")
    return _as_output(_ll_qgp_normal(mu, sigma, n, qs.values, grid_factors(qs.grid)))


def loglik_qgp_qf(dist: Distribution, n, qs: QuantileSet):
    """QGP on the quantile scale, ``Q_hat ~ N(Q(p), Gamma o q q^T / n)``.

    Evaluates only the quantile function and quantile density of ``dist``.
    """
    if np.any(np.asarray(n) <= 0):
        raise PreconditionError("n must be positive")
    return _as_output(_ll_qgp_qf(dist, n, qs.values, grid_factors(qs.grid)))


def _check_support(dist, qs):
    u = np.asarray(dist._cdf(qs.values))
    bad = ~((u > 0) & (u < 1))
    if np.any(bad):
        k = int(np.argwhere(bad)[0][-1])
        raise DomainError(f"quantile value at index {k} lies outside the support of {dist.family}")


def loglik_qgp_pit(dist: Distribution, n, qs: QuantileSet):
    """PIT QGP: ``F(Q_hat) ~ N(p, Gamma / n)``; evaluates only the CDF."""
    if np.any(np.asarray(n) <= 0):
        raise PreconditionError("n must be positive")
    _check_support(dist, qs)
    return _as_output(_ll_qgp_pit(dist, n, qs.values, grid_factors(qs.grid)))


def loglik_ind(dist: Distribution, sigma_rho, qs: QuantileSet):
    """Independent-error model: ``F(Q_hat(p_k)) ~ N(p_k, sigma_rho^2)``."""
    if np.any(np.asarray(sigma_rho) <= 0):
        raise PreconditionError("sigma_rho must be positive")
    _check_support(dist, qs)
    return _as_output(_ll_ind(dist, sigma_rho, qs.values, grid_factors(qs.grid)))


def loglik_ord(dist: Distribution, n, qs: QuantileSet):
    """Joint log density of the order statistics matched to the levels."""
    if np.any(np.diff(qs.values) <= 0):
        raise DomainError("order-statistic likelihood needs strictly increasing quantile values")
    n_arr = np.floor(np.asarray(n, dtype=float) + 0.5)
    if np.any(n_arr < 1):
        raise PreconditionError("n must be at least 1")
    j = order_indices(qs.probs, n_arr)
    if np.any(np.diff(j, axis=-1) <= 0) or np.any(j[..., 0] < 1) or np.any(j[..., -1] > n_arr[..., None]):
        raise PreconditionError(f"levels map to coincident or out-of-range order statistics for n={n}: {j}")
    return _as_output(_ll_ord(dist, n_arr, qs.values, grid_factors(qs.grid)))


def log_prior(params: dict[str, np.ndarray], priors: PriorSpec):
    """Sum of prior log densities.

    ``params`` maps parameter names (``mu``, ``mu[2]``, ``w``, ...) to values;
    each name is scored by the prior of its group (the name with any
    ``[index]`` suffix removed). Out-of-support values give ``-inf``.
    """
    total = 0.0
    for name, value in params.items():
        group = name.split("[", 1)[0]
        if group not in priors:
            raise PreconditionError(f"no prior for parameter {name!r}")
        total = total + priors[group].logpdf(value)
    return total
