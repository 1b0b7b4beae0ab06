"""Adaptive random-walk Metropolis, least-squares fitting and posterior summaries.

The sampler runs any number of independent chains in lockstep: every
array carries a leading chain axis and each chain draws its random numbers
from its own generator, so a chain's draws do not depend on which other
chains share the batch.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import optimize, special

from .distributions import LOCATION_SCALE_FAMILIES, FAMILIES, Distribution, tukey_lambda_quantile
from .empirical import ProbabilityGrid, QuantileSet
from .errors import DomainError, InitializationError, PreconditionError
from .likelihoods import (
    ModelKind,
    ModelSpec,
    Parameter,
    _ll_ind,
    _ll_ord,
    _ll_qgp_normal,
    _ll_qgp_pit,
    _ll_qgp_qf,
    build_distribution,
    family_parameters,
    family_valid,
    grid_factors,
    log_prior,
    order_indices,
)

__all__ = [
    "McmcConfig",
    "PosteriorSamples",
    "Diagnostics",
    "LeastSquaresResult",
    "ParameterLayout",
    "fit_mcmc",
    "fit_mcmc_batch",
    "sample_prior",
    "fit_least_squares",
    "posterior_predictive",
    "credible_interval",
    "diagnostics",
    "split_rhat",
    "effective_sample_size",
    "read_posterior_csv",
]

MIN_DIAGNOSTIC_DRAWS = 16


@dataclass(frozen=True)
class McmcConfig:
    """Run length and adaptation settings of the Metropolis sampler.

    Parameters
    ----------
    total_draws, burn_in
        Iterations in total and at the start that are discarded. The
        proposal adapts only during burn-in and is frozen afterward.
    thin
        Keep every ``thin``-th post-burn-in iteration.
    seed
        Integer seed; chain ``r`` of a batch uses the stream
        ``SeedSequence(seed, spawn_key=(r,))``.
    window_start
        Fraction of burn-in after which the covariance estimate is restarted,
        so the proposal is not shaped by the initial transient.
    adapt_interval
        Iterations between proposal-covariance updates.
    target_accept
        Robbins-Monro target; ``None`` selects 0.44 for up to four
        unconstrained dimensions and 0.234 above.
    """

    total_draws: int = 60_000
    burn_in: int = 10_000
    thin: int = 1
    seed: int = 0
    window_start: float = 0.5
    adapt_interval: int = 100
    target_accept: float | None = None
    init_retries: int = 20

    def __post_init__(self):
        if self.total_draws < 1:
            raise PreconditionError("total_draws must be positive")
        if not 0 <= self.burn_in < self.total_draws:
            raise PreconditionError("burn_in must be nonnegative and smaller than total_draws")
        if self.thin < 1:
            raise PreconditionError("thin must be a positive integer")
        if not 0.0 <= self.window_start < 1.0:
            raise PreconditionError("window_start must lie in [0, 1)")
        if self.adapt_interval < 1:
            raise PreconditionError("adapt_interval must be positive")
        if self.target_accept is not None and not 0 < self.target_accept < 1:
            raise PreconditionError("target_accept must lie in (0, 1)")

    @classmethod
    def for_model(cls, model: ModelSpec, **overrides) -> McmcConfig:
        """Default run lengths: 60,000/10,000, or 80,000/20,000 for mixtures."""
        base = dict(total_draws=80_000, burn_in=20_000) if model.family == "NormalMixture" else {}
        base.update(overrides)
        return cls(**base)

    @property
    def retained(self) -> int:
        return (self.total_draws - self.burn_in) // self.thin


# ---------------------------------------------------------------------------
# unconstrained parameterization


class ParameterLayout:
    """Maps between constrained parameters and an unconstrained vector.

    Reals are left as they are, positives are log transformed and a simplex
    of size C uses C - 1 stick-breaking coordinates centred so that zero maps
    to equal weights.
    """

    def __init__(self, params: list[Parameter]):
        self.params = list(params)
        self.names: list[str] = []
        self._slices = []
        i = 0
        for prm in self.params:
            width = prm.size - 1 if prm.kind == "simplex" else 1
            self._slices.append(slice(i, i + width))
            i += width
            if prm.kind == "simplex":
                self.names += [f"{prm.name}[{c + 1}]" for c in range(prm.size)]
            else:
                self.names.append(prm.name)
        self.dim = i

    def constrain(self, U: np.ndarray) -> tuple[dict[str, np.ndarray], np.ndarray]:
        """Constrained values and log-Jacobian for ``U`` of shape ``(..., dim)``."""
        U = np.asarray(U, dtype=float)
        theta: dict[str, np.ndarray] = {}
        logjac = np.zeros(U.shape[:-1])
        for prm, sl in zip(self.params, self._slices):
            u = U[..., sl]
            if prm.kind == "real":
                theta[prm.name] = u[..., 0]
            elif prm.kind == "positive":
                with np.errstate(over="ignore"):
                    theta[prm.name] = np.exp(u[..., 0])
                logjac = logjac + u[..., 0]
            else:
                w, lj = _stick_breaking(u, prm.size)
                theta[prm.name] = w
                logjac = logjac + lj
        return theta, logjac

    def unconstrain(self, theta: dict[str, np.ndarray]) -> np.ndarray:
        parts = []
        for prm in self.params:
            v = np.asarray(theta[prm.name], dtype=float)
            if prm.kind == "real":
                parts.append(v[..., None])
            elif prm.kind == "positive":
                if np.any(v <= 0):
                    raise DomainError(f"parameter {prm.name} must be positive")
                parts.append(np.log(v)[..., None])
            else:
                parts.append(_stick_breaking_inverse(v))
        return np.concatenate(parts, axis=-1)

    def flatten(self, theta: dict[str, np.ndarray]) -> np.ndarray:
        """Columns in ``names`` order, simplexes expanded."""
        cols = []
        for prm in self.params:
            v = np.asarray(theta[prm.name], dtype=float)
            cols.append(v if prm.kind == "simplex" else v[..., None])
        return np.concatenate(cols, axis=-1)

    def unflatten(self, X: np.ndarray) -> dict[str, np.ndarray]:
        X = np.asarray(X, dtype=float)
        theta = {}
        i = 0
        for prm in self.params:
            width = prm.size if prm.kind == "simplex" else 1
            theta[prm.name] = X[..., i : i + width] if prm.kind == "simplex" else X[..., i]
            i += width
        return theta


def _stick_breaking(u, C):
    # z_k = logistic(u_k - log(C - k)), k = 1..C-1, puts equal weights at u = 0
    k = np.arange(1, C)
    x = u - np.log(C - k)
    z = special.expit(x)
    log_z = -np.logaddexp(0.0, -x)
    log_1mz = -np.logaddexp(0.0, x)
    # remaining stick before each break
    log_rem = np.concatenate([np.zeros(u.shape[:-1] + (1,)), np.cumsum(log_1mz, axis=-1)], axis=-1)
    rem = np.exp(log_rem)
    w = np.concatenate([rem[..., :-1] * z, rem[..., -1:]], axis=-1)
    w = w / w.sum(axis=-1, keepdims=True)
    logjac = np.sum(log_z + log_1mz + log_rem[..., :-1], axis=-1)
    return w, logjac


def _stick_breaking_inverse(w):
    w = np.asarray(w, dtype=float)
    C = w.shape[-1]
    if np.any(w <= 0) or np.any(np.abs(w.sum(axis=-1) - 1.0) > 1e-9):
        raise DomainError("simplex values must be positive and sum to 1")
    rem = 1.0 - np.concatenate([np.zeros(w.shape[:-1] + (1,)), np.cumsum(w[..., :-1], axis=-1)], axis=-1)
    z = w[..., :-1] / rem[..., :-1]
    return special.logit(z) + np.log(C - np.arange(1, C))


def _safe_theta(params: list[Parameter], family: str) -> dict[str, float | np.ndarray]:
    """A valid parameter point substituted for rejected rows before evaluation."""
    out: dict[str, float | np.ndarray] = {}
    for prm in params:
        if prm.kind == "simplex":
            out[prm.name] = np.full(prm.size, 1.0 / prm.size)
        else:
            out[prm.name] = 1.0 if prm.kind == "positive" else 0.0
    if family == "GeneralizedLambda":
        out.update(l3=0.14, l4=0.14)
    return out


# ---------------------------------------------------------------------------
# log posterior over a batch of chains


class _Target:
    """Log posterior of a batch of chains, each with its own data row."""

    def __init__(self, model: ModelSpec, values: np.ndarray, grid: ProbabilityGrid, n_fixed, likelihood: bool = True):
        self.model = model
        self.params = model.parameters()
        self.layout = ParameterLayout(self.params)
        self.values = np.asarray(values, dtype=float)
        self.gf = grid_factors(grid)
        self.n_fixed = None if n_fixed is None else np.asarray(n_fixed, dtype=float)
        self.likelihood = likelihood
        self._safe = _safe_theta(self.params, model.family)
        self._family_names = [p.name for p in family_parameters(model.family, model.components)]

    def __call__(self, U: np.ndarray) -> np.ndarray:
        theta, logjac = self.layout.constrain(U)
        ok = np.ones(U.shape[:-1], dtype=bool)
        for prm in self.params:
            v = theta[prm.name]
            if prm.kind == "simplex":
                ok &= np.all(np.isfinite(v) & (v > 0), axis=-1)
            elif prm.kind == "positive":
                ok &= np.isfinite(v) & (v > 0)
            else:
                ok &= np.isfinite(v)
        if not np.all(ok):
            theta = self._substitute(theta, ok)
        valid = np.asarray(family_valid(self.model.family, theta), dtype=bool)
        if not np.all(valid):
            ok &= valid
            theta = self._substitute(theta, ok)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            lp = log_prior(theta, self.model.priors) + logjac
            if self.likelihood:
                lp = lp + self._loglik(theta)
        lp = np.where(ok & ~np.isnan(lp), lp, -np.inf)
        return lp

    def _substitute(self, theta, ok):
        out = {}
        for name, v in theta.items():
            safe = self._safe[name]
            mask = ok[..., None] if np.ndim(safe) else ok
            out[name] = np.where(mask, v, safe)
        return out

    def _loglik(self, theta):
        model, gf, y = self.model, self.gf, self.values
        kind = model.kind
        n = theta["n"] if model.estimates_n else self.n_fixed
        if kind is ModelKind.QGP_NORMAL:
            return _ll_qgp_normal(theta["mu"], theta["sigma"], n, y, gf)
        dist = build_distribution(model.family, {k: theta[k] for k in self._family_names}, model.components, trailing=1)
        if kind is ModelKind.QGP_QF:
            return _ll_qgp_qf(dist, n, y, gf)
        if kind is ModelKind.QGP_PIT:
            return _ll_qgp_pit(dist, n, y, gf)
        if kind is ModelKind.IND:
            return _ll_ind(dist, 1.0 / theta["nu"], y, gf)
        return _ll_ord(dist, n, y, gf)


# ---------------------------------------------------------------------------
# least squares


@dataclass(frozen=True)
class LeastSquaresResult:
    """Least-squares quantile fit.

    ``objective`` is the sum of squared differences between the fitted
    quantile function and the data at the grid levels.
    """

    family: str
    params: dict[str, float | np.ndarray]
    objective: float
    init_objective: float
    converged: bool
    iterations: int

    def distribution(self, components: int = 1) -> Distribution:
        return build_distribution(self.family, self.params, components)


def _ls_objective_fn(family: str, probs: np.ndarray, values: np.ndarray, components: int):
    layout = ParameterLayout(family_parameters(family, components))

    def objective(u):
        theta, _ = layout.constrain(np.asarray(u, dtype=float))
        for v in theta.values():
            if not np.all(np.isfinite(v)):
                return np.inf
        if not np.all(family_valid(family, theta)):
            return np.inf
        try:
            dist = build_distribution(family, theta, components)
            with np.errstate(all="ignore"):
                q = dist._quantile(probs)
        except (PreconditionError, ArithmeticError, RuntimeError):
            return np.inf
        r = q - values
        val = float(np.dot(r, r))
        return val if math.isfinite(val) else np.inf

    return layout, objective


def _closed_form_start(family: str, probs: np.ndarray, values: np.ndarray, components: int = 1) -> dict:
    """Cheap starting point from linear regressions on standardized quantiles."""
    y = values
    spread = float(y[-1] - y[0]) if y[-1] > y[0] else 1.0

    def regress(z):
        zc = z - z.mean()
        var = float(np.dot(zc, zc))
        slope = float(np.dot(zc, y - y.mean()) / var) if var > 0 else 0.0
        return float(y.mean() - slope * z.mean()), slope

    if family in LOCATION_SCALE_FAMILIES:
        z = FAMILIES[family]._std_quantile(probs)
        mu, sigma = regress(z)
        if not sigma > 0:
            sigma = spread / max(float(z[-1] - z[0]), 1e-12)
        return {"mu": mu, "sigma": sigma}
    if family == "Exponential":
        z = -np.log1p(-probs)
        s = float(np.dot(z, y))
        rate = float(np.dot(z, z)) / s if s > 0 else 1.0
        return {"rate": rate}
    if family == "TukeyLambda":
        lam = 0.14
        mu, sigma = regress(tukey_lambda_quantile(probs, lam))
        return {"mu": mu, "sigma": sigma if sigma > 0 else spread, "lam": lam}
    if family == "GeneralizedLambda":
        l3 = l4 = 0.14
        l1, inv_l2 = regress(probs**l3 - (1.0 - probs) ** l4)
        return {"l1": l1, "l2": 1.0 / inv_l2 if inv_l2 > 0 else 1.0 / spread, "l3": l3, "l4": l4}
    if family == "Metalog3":
        X = np.column_stack([np.ones_like(probs), special.logit(probs), probs - 0.5])
        a1, a2, a3 = np.linalg.lstsq(X, y, rcond=None)[0]
        if not a2 > 0:
            a2 = spread / max(float(special.logit(probs[-1]) - special.logit(probs[0])), 1e-12)
        a3 = max(a3, -3.9 * a2)
        return {"a1": float(a1), "a2": float(a2), "a3": float(a3)}
    if family == "NormalMixture":
        return _mixture_start(probs, values, components)
    raise PreconditionError(f"unknown family {family!r}")


def _mixture_start(probs, values, C):
    """Component means spread across the data range, equal weights and sds."""
    pos = (np.arange(C) + 0.5) / C
    means = np.interp(pos, probs, values)
    spread = float(values[-1] - values[0]) if values[-1] > values[0] else 1.0
    theta: dict = {f"mu[{c + 1}]": float(means[c]) for c in range(C)}
    theta.update({f"sigma[{c + 1}]": spread / (2.0 * C) for c in range(C)})
    theta["w"] = np.full(C, 1.0 / C)
    return theta


def fit_least_squares(
    family: str,
    qs: QuantileSet,
    init: dict | None = None,
    components: int = 1,
    max_iter: int | None = None,
    restarts: int = 2,
) -> LeastSquaresResult:
    """Minimize ``sum_k (Q_theta(p_k) - q_k)^2`` by Nelder-Mead simplex descent.

    The search runs in the unconstrained parameterization of the family
    (log scale for positive parameters). If the iteration cap is reached the
    best point found is returned with ``converged=False`` and a warning.
    """
    if family not in FAMILIES:
        raise PreconditionError(f"unknown family {family!r}")
    probs, values = qs.probs, qs.values
    layout, objective = _ls_objective_fn(family, probs, values, components)
    if init is None:
        init = _closed_form_start(family, probs, values, components)
    u0 = layout.unconstrain(init)
    f0 = objective(u0)
    if not math.isfinite(f0):
        raise InitializationError(f"least-squares objective is not finite at the initial point {init}")
    max_iter = max_iter or 4000 * layout.dim
    u, f, nit, converged = u0, f0, 0, False
    for _ in range(1 + restarts):
        res = optimize.minimize(
            objective,
            u,
            method="Nelder-Mead",
            options=dict(xatol=1e-11, fatol=1e-15, maxiter=max_iter, maxfev=2 * max_iter, adaptive=layout.dim > 3),
        )
        nit += int(res.nit)
        improved = res.fun < f
        if res.fun <= f:
            u, f = res.x, float(res.fun)
        converged = bool(res.success)
        # a restart from the optimum rebuilds the simplex; stop once it no longer helps
        if not improved or f <= 1e-300:
            break
    if not converged:
        warnings.warn(f"least-squares fit of {family} stopped at the iteration cap", RuntimeWarning, stacklevel=2)
    theta, _ = layout.constrain(u)
    params = {k: (float(v) if np.ndim(v) == 0 else np.asarray(v)) for k, v in theta.items()}
    return LeastSquaresResult(family, params, f, f0, converged, nit)


# ---------------------------------------------------------------------------
# posterior samples and diagnostics


@dataclass(frozen=True, eq=False)
class Diagnostics:
    """Per-parameter split-chain R-hat and effective sample size."""

    names: tuple[str, ...]
    rhat: np.ndarray
    ess: np.ndarray
    degenerate: np.ndarray

    def as_dict(self) -> dict[str, tuple[float, float]]:
        return {n: (float(r), float(e)) for n, r, e in zip(self.names, self.rhat, self.ess)}


def split_rhat(x: np.ndarray, segments: int = 4) -> float:
    """Potential scale reduction across equal consecutive segments of one chain."""
    x = np.asarray(x, dtype=float)
    m = x.size // segments
    if m < 2:
        raise PreconditionError(f"need at least {2 * segments} draws for {segments} segments")
    seg = x[: m * segments].reshape(segments, m)
    W = float(np.mean(seg.var(axis=1, ddof=1)))
    B = m * float(seg.mean(axis=1).var(ddof=1))
    if W == 0:
        return math.nan
    var_plus = (m - 1) / m * W + B / m
    return math.sqrt(var_plus / W)


def effective_sample_size(x: np.ndarray) -> float:
    """ESS from FFT autocorrelations truncated by Geyer's initial monotone sequence."""
    x = np.asarray(x, dtype=float)
    S = x.size
    xc = x - x.mean()
    var = float(np.dot(xc, xc)) / S
    if var == 0 or S < 4:
        return math.nan
    nfft = 1 << (2 * S - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:S] / S
    rho = acov / acov[0]
    npairs = S // 2
    pairs = rho[: 2 * npairs : 2] + rho[1 : 2 * npairs : 2]
    # initial positive sequence, then made monotone
    neg = np.nonzero(pairs <= 0)[0]
    k = int(neg[0]) if neg.size else npairs
    pairs = np.minimum.accumulate(pairs[:k]) if k else pairs[:0]
    tau = -1.0 + 2.0 * float(np.sum(pairs))
    tau = max(tau, 1.0 / math.log10(max(S, 10)))
    return S / tau


def _diagnostics_from(names, draws) -> Diagnostics:
    P = draws.shape[1]
    rhat = np.full(P, np.nan)
    ess = np.full(P, np.nan)
    degenerate = np.zeros(P, dtype=bool)
    for j in range(P):
        col = draws[:, j]
        if np.ptp(col) == 0:
            degenerate[j] = True
            continue
        rhat[j] = split_rhat(col)
        ess[j] = effective_sample_size(col)
    return Diagnostics(tuple(names), rhat, ess, degenerate)


@dataclass(frozen=True, eq=False)
class PosteriorSamples:
    """Retained draws of one chain, one column per (expanded) parameter."""

    model: ModelSpec
    names: tuple[str, ...]
    draws: np.ndarray
    acceptance_rate: float
    rhat: np.ndarray
    ess: np.ndarray
    n_value: float | None = None
    config: McmcConfig | None = None

    def __post_init__(self):
        d = np.array(self.draws, dtype=float)
        if d.ndim != 2 or d.shape[1] != len(self.names):
            raise PreconditionError("draws must be a (draws x parameters) matrix matching the names")
        d.setflags(write=False)
        object.__setattr__(self, "draws", d)
        object.__setattr__(self, "names", tuple(self.names))

    def __len__(self) -> int:
        return self.draws.shape[0]

    @property
    def layout(self) -> ParameterLayout:
        return ParameterLayout(self.model.parameters())

    def column(self, name: str) -> np.ndarray:
        try:
            return self.draws[:, self.names.index(name)]
        except ValueError:
            raise KeyError(f"unknown parameter {name!r}; available: {', '.join(self.names)}") from None

    def theta(self, rows=None) -> dict[str, np.ndarray]:
        """Parameter dictionary (simplexes regrouped) for the selected draws."""
        X = self.draws if rows is None else self.draws[rows]
        return self.layout.unflatten(X)

    def mean(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.draws.mean(axis=0))}

    def relabeled(self) -> PosteriorSamples:
        """Mixture components reordered by mean within every draw."""
        if self.model.family != "NormalMixture" or self.model.components == 1:
            return self
        C = self.model.components
        groups = [[self.names.index(f"{g}[{c + 1}]") for c in range(C)] for g in ("mu", "sigma", "w")]
        order = np.argsort(self.draws[:, groups[0]], axis=1, kind="stable")
        X = self.draws.copy()
        for idx in groups:
            X[:, idx] = np.take_along_axis(self.draws[:, idx], order, axis=1)
        return replace(self, draws=X)

    def point_theta(self) -> dict[str, float | np.ndarray]:
        """Marginal posterior means, mixture components matched by ordering means first."""
        mean = self.relabeled().draws.mean(axis=0)
        theta = self.layout.unflatten(mean)
        family_names = {p.name for p in family_parameters(self.model.family, self.model.components)}
        out = {}
        for k, v in theta.items():
            if k in family_names:
                out[k] = float(v) if np.ndim(v) == 0 else np.asarray(v) / np.sum(v)
        return out

    def point_distribution(self) -> Distribution:
        """Distribution at the marginal posterior means."""
        return build_distribution(self.model.family, self.point_theta(), self.model.components)

    def diagnostics(self) -> Diagnostics:
        return diagnostics(self)

    def summary_rows(self, level: float = 0.9) -> list[dict]:
        rows = []
        for j, name in enumerate(self.names):
            col = self.draws[:, j]
            lo, hi = np.quantile(col, [(1 - level) / 2, 1 - (1 - level) / 2])
            rows.append(
                dict(
                    parameter=name,
                    mean=float(col.mean()),
                    sd=float(col.std(ddof=1)) if col.size > 1 else math.nan,
                    low=float(lo),
                    median=float(np.median(col)),
                    high=float(hi),
                    rhat=float(self.rhat[j]),
                    ess=float(self.ess[j]),
                    acceptance_rate=self.acceptance_rate,
                )
            )
        return rows

    def to_csv(self, path: str | Path, level: float = 0.9) -> Path:
        """Write the draws and a ``<stem>.summary.csv`` sidecar; returns the sidecar path."""
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.names)
            for row in self.draws:
                w.writerow([repr(float(v)) for v in row])
        sidecar = path.with_name(path.stem + ".summary.csv")
        rows = self.summary_rows(level)
        with open(sidecar, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            for r in rows:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
        return sidecar


def read_posterior_csv(path: str | Path, model: ModelSpec) -> PosteriorSamples:
    """Read draws written by :meth:`PosteriorSamples.to_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    names = rows[0]
    expected = ParameterLayout(model.parameters()).names
    if names != expected:
        raise PreconditionError(f"posterior columns {names} do not match the model parameters {expected}")
    draws = np.array([[float(v) for v in r] for r in rows[1:]])
    diag = _diagnostics_from(names, draws) if len(draws) >= MIN_DIAGNOSTIC_DRAWS else None
    nan = np.full(len(names), np.nan)
    return PosteriorSamples(
        model, names, draws, math.nan, diag.rhat if diag else nan, diag.ess if diag else nan
    )


def diagnostics(samples: PosteriorSamples) -> Diagnostics:
    """Split-chain R-hat over four segments and autocorrelation ESS per parameter.

    Constant columns are flagged ``degenerate`` and get NaN statistics.
    """
    if len(samples) < MIN_DIAGNOSTIC_DRAWS:
        raise PreconditionError(f"diagnostics need at least {MIN_DIAGNOSTIC_DRAWS} draws, got {len(samples)}")
    return _diagnostics_from(samples.names, samples.draws)


def credible_interval(samples: PosteriorSamples, param: str, level: float = 0.9) -> tuple[float, float]:
    """Equal-tailed interval from the posterior sample quantiles."""
    if not 0 < level < 1:
        raise PreconditionError("credible level must lie in (0, 1)")
    col = samples.column(param)
    lo, hi = np.quantile(col, [(1 - level) / 2, 1 - (1 - level) / 2])
    return float(lo), float(hi)


def posterior_predictive(samples: PosteriorSamples, count: int, seed=None, model: ModelSpec | None = None) -> np.ndarray:
    """Draw ``count`` values, each from the distribution at a uniformly chosen posterior draw.

    The uniform variates come from ``default_rng(seed)`` exactly as in
    :func:`quantmatch.distributions.sample`, so a point-mass posterior
    reproduces ``sample(dist, count, seed)``.
    """
    if count < 1:
        raise PreconditionError("predictive sample count must be at least 1")
    if len(samples) == 0:
        raise PreconditionError("no posterior draws")
    model = model or samples.model
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng_u = np.random.default_rng(ss)
    rng_idx = np.random.default_rng(np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (1,)))
    u = np.clip(rng_u.random(count), 2.0**-60, 1.0 - 2.0**-53)
    idx = rng_idx.integers(len(samples), size=count)
    theta = samples.theta(idx)
    family_names = [p.name for p in family_parameters(model.family, model.components)]
    dist = build_distribution(model.family, {k: theta[k] for k in family_names}, model.components)
    return np.asarray(dist._quantile(u), dtype=float)


# ---------------------------------------------------------------------------
# the sampler


def _chain_seed(seed, r: int) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed, spawn_key=(r,))


def _child(ss: np.random.SeedSequence, k: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (k,))


def _resolve_n(model: ModelSpec, sample_size):
    if not model.uses_n or model.estimates_n:
        return None
    n = model.n if model.n is not None else sample_size
    if n is None:
        raise PreconditionError("the model has a known n but neither the model nor the data provide a sample size")
    return float(n)


def _initial_unconstrained(model: ModelSpec, probs, values) -> np.ndarray:
    layout = ParameterLayout(model.parameters())
    fam = model.family
    if fam == "NormalMixture":
        theta = _mixture_start(probs, values, model.components)
    else:
        qs = QuantileSet.from_arrays(probs, values)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            try:
                theta = dict(fit_least_squares(fam, qs, components=model.components, restarts=0).params)
            except InitializationError:
                theta = _closed_form_start(fam, probs, values, model.components)
    if model.estimates_n:
        theta["n"] = 100.0
    if model.kind is ModelKind.IND:
        try:
            dist = build_distribution(fam, theta, model.components)
            with np.errstate(all="ignore"):
                r = dist._cdf(values) - probs
            rms = float(np.sqrt(np.mean(r * r)))
        except (PreconditionError, ArithmeticError, RuntimeError):
            rms = math.nan
        theta["nu"] = 1.0 / max(rms, 0.01) if math.isfinite(rms) else 10.0
    return layout.unconstrain(theta)


def _initialize(target: _Target, model: ModelSpec, probs, values, rngs, retries: int):
    """Start points with finite log posterior; failed chains are reported in a mask."""
    B = values.shape[0]
    d = target.layout.dim
    U0 = np.empty((B, d))
    for b in range(B):
        try:
            U0[b] = _initial_unconstrained(model, probs, values[b])
        except (PreconditionError, DomainError, InitializationError, ArithmeticError):
            U0[b] = target.layout.unconstrain({k: np.asarray(v) for k, v in target._safe.items()})
    U = U0.copy()
    lp = target(U)
    for attempt in range(1, retries + 1):
        bad = ~np.isfinite(lp)
        if not np.any(bad):
            break
        jitter = np.stack([rngs[b].standard_normal(d) for b in range(B)])
        cand = np.where(bad[:, None], U0 + 0.1 * math.sqrt(attempt) * jitter, U)
        lp_c = target(cand)
        take = bad & np.isfinite(lp_c)
        U = np.where(take[:, None], cand, U)
        lp = np.where(take, lp_c, lp)
    return U, lp, np.isfinite(lp)


def _initial_scales(target: _Target, U, lp, h: float = 1e-3):
    """Proposal sds from the diagonal curvature of the log posterior at the start."""
    B, d = U.shape
    sd = np.full((B, d), 0.1)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        up, dn = target(U + e), target(U - e)
        with np.errstate(invalid="ignore"):
            curv = (up - 2.0 * lp + dn) / (h * h)
        good = np.isfinite(curv) & (curv < 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.clip(1.0 / np.sqrt(-curv), 1e-4, 2.0)
        sd[:, i] = np.where(good, s, 0.1)
    return sd


def _batched_cholesky(cov, previous):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        out = previous.copy()
        for b in range(cov.shape[0]):
            try:
                out[b] = np.linalg.cholesky(cov[b])
            except np.linalg.LinAlgError:
                pass
        return out


def _run_chains(target: _Target, U, lp, rngs, cfg: McmcConfig, block: int = 512):
    """Adaptive random-walk Metropolis for a batch of chains.

    Returns the retained unconstrained draws ``(B, S, d)`` and the
    post-burn-in acceptance rate of each chain.
    """
    B, d = U.shape
    alpha_star = cfg.target_accept or (0.44 if d <= 4 else 0.234)
    L = np.zeros((B, d, d))
    idx = np.arange(d)
    L[:, idx, idx] = _initial_scales(target, U, lp)
    log_s = np.zeros(B)
    scale_opt = 2.38 / math.sqrt(d)
    count = 0
    mean = np.zeros((B, d))
    M2 = np.zeros((B, d, d))
    restart_at = int(cfg.window_start * cfg.burn_in)
    min_count = max(100, 10 * d)

    S = cfg.retained
    out = np.empty((B, S, d))
    accepted = np.zeros(B)
    kept = 0
    t = 0
    while t < cfg.total_draws:
        nb = min(block, cfg.total_draws - t)
        Z = np.stack([r.standard_normal((nb, d)) for r in rngs], axis=1)
        LU = np.stack([np.log(r.random(nb)) for r in rngs], axis=1)
        for i in range(nb):
            step = np.exp(log_s)[:, None] * np.einsum("bij,bj->bi", L, Z[i])
            prop = U + step
            lp_prop = target(prop)
            log_alpha = np.where(np.isnan(lp_prop), -np.inf, lp_prop - lp)
            acc = LU[i] < log_alpha
            U = np.where(acc[:, None], prop, U)
            lp = np.where(acc, lp_prop, lp)
            if t < cfg.burn_in:
                a = np.exp(np.minimum(log_alpha, 0.0))
                log_s = log_s + (1.0 + t / 20.0) ** -0.6 * (a - alpha_star)
                if t == restart_at:
                    count = 0
                    mean[:] = 0.0
                    M2[:] = 0.0
                count += 1
                delta = U - mean
                mean = mean + delta / count
                M2 = M2 + np.einsum("bi,bj->bij", delta, U - mean)
                if count >= min_count and (t + 1) % cfg.adapt_interval == 0:
                    cov = M2 / (count - 1)
                    cov = cov + 1e-10 * np.eye(d) * (1.0 + np.trace(cov, axis1=1, axis2=2))[:, None, None] / d
                    # restart the step multiplier at the 2.38 / sqrt(d) scaling
                    L = _batched_cholesky(scale_opt * scale_opt * cov, L * np.exp(log_s)[:, None, None])
                    log_s = np.zeros(B)
            else:
                accepted += acc
                if (t - cfg.burn_in) % cfg.thin == cfg.thin - 1 and kept < S:
                    out[:, kept] = U
                    kept += 1
            t += 1
    rate = accepted / max(cfg.total_draws - cfg.burn_in, 1)
    return out, rate


def _as_samples(model, target, Ub, rate, n_value, cfg) -> PosteriorSamples:
    theta, _ = target.layout.constrain(Ub)
    X = target.layout.flatten(theta)
    names = target.layout.names
    if len(X) >= MIN_DIAGNOSTIC_DRAWS:
        diag = _diagnostics_from(names, X)
        rhat, ess = diag.rhat, diag.ess
    else:
        rhat = ess = np.full(len(names), np.nan)
    return PosteriorSamples(model, names, X, float(rate), rhat, ess, n_value, cfg)


def _check_data(model: ModelSpec, values: np.ndarray):
    if np.any(np.diff(values, axis=-1) < 0):
        raise PreconditionError("quantile values must be nondecreasing")
    if model.kind is ModelKind.ORD and np.any(np.diff(values, axis=-1) <= 0):
        raise DomainError("the order-statistic model needs strictly increasing quantile values")


def fit_mcmc_batch(
    model: ModelSpec,
    values: np.ndarray,
    grid: ProbabilityGrid,
    cfg: McmcConfig,
    sample_sizes=None,
    seeds=None,
) -> list[PosteriorSamples | Exception]:
    """Run one independent chain per data row in lockstep.

    Parameters
    ----------
    values
        ``(B, K)`` quantile values, one row per chain.
    sample_sizes
        Known ``n`` per row (scalar or length ``B``); required when the
        model has a known sample size not fixed in ``model.n``.
    seeds
        One seed or ``SeedSequence`` per chain. By default chain ``r`` uses
        ``SeedSequence(cfg.seed, spawn_key=(r,))``.

    Returns
    -------
    list
        A :class:`PosteriorSamples` per chain, or the exception explaining
        why that chain could not be initialized.
    """
    grid = grid if isinstance(grid, ProbabilityGrid) else ProbabilityGrid(grid)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    B, K = values.shape
    if K != len(grid):
        raise PreconditionError(f"{K} quantile values per row for a grid of {len(grid)} levels")
    _check_data(model, values)
    if seeds is None:
        seeds = [_chain_seed(cfg.seed, r) for r in range(B)]
    seeds = [s if isinstance(s, np.random.SeedSequence) else np.random.SeedSequence(s) for s in seeds]
    if len(seeds) != B:
        raise PreconditionError("one seed per chain is required")
    ns = np.broadcast_to(np.asarray(sample_sizes if sample_sizes is not None else np.nan, dtype=float), (B,))
    n_vals = None
    if model.uses_n and not model.estimates_n:
        n_vals = np.array([_resolve_n(model, None if np.isnan(v) else v) for v in ns])
        if model.kind is ModelKind.ORD:
            j = order_indices(grid.probs, n_vals)
            if np.any(np.diff(j, axis=-1) <= 0) or np.any(j[:, -1] > np.floor(n_vals + 0.5)):
                raise PreconditionError("levels map to coincident order statistics for the given n")

    sampler_rngs = [np.random.default_rng(_child(s, 0)) for s in seeds]
    init_rngs = [np.random.default_rng(_child(s, 1)) for s in seeds]
    target = _Target(model, values, grid, n_vals)
    U, lp, ok = _initialize(target, model, grid.probs, values, init_rngs, cfg.init_retries)

    results: list[PosteriorSamples | Exception] = [None] * B  # type: ignore[list-item]
    live = np.nonzero(ok)[0]
    for b in np.nonzero(~ok)[0]:
        results[b] = InitializationError(
            f"chain {b}: log posterior not finite at the start point after {cfg.init_retries} retries; "
            "the data may be incompatible with the model support"
        )
    if live.size:
        sub = _Target(model, values[live], grid, None if n_vals is None else n_vals[live])
        draws, rate = _run_chains(sub, U[live], lp[live], [sampler_rngs[b] for b in live], cfg)
        for i, b in enumerate(live):
            results[b] = _as_samples(model, sub, draws[i], rate[i], None if n_vals is None else float(n_vals[b]), cfg)
    return results


def fit_mcmc(model: ModelSpec, qs: QuantileSet, cfg: McmcConfig | None = None) -> PosteriorSamples:
    """Posterior draws for one quantile set by adaptive random-walk Metropolis.

    The target is the log prior plus log-likelihood in the unconstrained
    parameterization (with its log-Jacobian). The proposal covariance adapts
    during burn-in and is frozen afterward. Draws are a deterministic
    function of ``(model, qs, cfg)``.
    """
    cfg = cfg or McmcConfig.for_model(model)
    res = fit_mcmc_batch(model, qs.values[None, :], qs.grid, cfg, sample_sizes=qs.sample_size, seeds=[_chain_seed(cfg.seed, 0)])[0]
    if isinstance(res, Exception):
        raise res
    return res


def sample_prior(model: ModelSpec, cfg: McmcConfig, probs=None) -> PosteriorSamples:
    """Run the sampler with the likelihood switched off (checks the Jacobians)."""
    grid = ProbabilityGrid(probs if probs is not None else [0.25, 0.5, 0.75])
    values = np.zeros((1, len(grid)))
    target = _Target(model, values, grid, 1.0, likelihood=False)
    layout = target.layout
    U = layout.unconstrain({k: np.asarray(v)[None] for k, v in target._safe.items()})
    lp = target(U)
    ss = _chain_seed(cfg.seed, 0)
    draws, rate = _run_chains(target, U, lp, [np.random.default_rng(_child(ss, 0))], cfg)
    return _as_samples(model, target, draws[0], rate[0], None, cfg)
