"""Sample quantiles, PIT transforms and the asymptotic covariance of quantiles."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distributions import Distribution
from .errors import DomainError, FormatError, NumericError, PreconditionError

__all__ = [
    "ProbabilityGrid",
    "QuantileSet",
    "SAMPLE_QUANTILE_TYPES",
    "sample_quantiles",
    "pit_transform",
    "brownian_bridge_cov",
    "qclt_cov",
    "cholesky",
    "read_quantile_csv",
    "write_quantile_csv",
]

# Hyndman-Fan sample quantile types mapped to numpy's method names
SAMPLE_QUANTILE_TYPES = {
    4: "interpolated_inverted_cdf",
    5: "hazen",
    6: "weibull",
    7: "linear",
    8: "median_unbiased",
    9: "normal_unbiased",
}


@dataclass(frozen=True, eq=False)
class ProbabilityGrid:
    """Strictly increasing probability levels in the open unit interval."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.probs, dtype=float))
        if p.ndim != 1 or p.size < 1:
            raise PreconditionError("probability grid must be a nonempty vector")
        if not np.all((p > 0) & (p < 1)):
            raise DomainError("probability levels must lie strictly inside (0, 1)")
        if np.any(np.diff(p) <= 0):
            raise PreconditionError("probability levels must be strictly increasing")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __len__(self) -> int:
        return self.probs.size

    def __eq__(self, other) -> bool:
        return isinstance(other, ProbabilityGrid) and np.array_equal(self.probs, other.probs)

    def __hash__(self) -> int:
        return hash(self.probs.tobytes())

    def is_symmetric(self, atol: float = 1e-9) -> bool:
        return bool(np.allclose(self.probs + self.probs[::-1], 1.0, atol=atol, rtol=0))


@dataclass(frozen=True, eq=False)
class QuantileSet:
    """Quantile values paired with their probability levels.

    ``sample_size`` is the number of observations the quantiles were
    estimated from, when known.
    """

    grid: ProbabilityGrid
    values: np.ndarray
    sample_size: int | None = None

    def __post_init__(self):
        if not isinstance(self.grid, ProbabilityGrid):
            object.__setattr__(self, "grid", ProbabilityGrid(self.grid))
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        if v.shape != self.grid.probs.shape:
            raise PreconditionError(f"{v.size} quantile values for {len(self.grid)} probability levels")
        if not np.all(np.isfinite(v)):
            raise DomainError("quantile values must be finite")
        if np.any(np.diff(v) < 0):
            k = int(np.argmax(np.diff(v) < 0))
            raise PreconditionError(f"quantile values decrease between levels {self.grid.probs[k]} and {self.grid.probs[k + 1]}")
        if self.sample_size is not None and self.sample_size < 1:
            raise PreconditionError("sample size must be a positive integer")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_arrays(cls, probs, values, sample_size: int | None = None) -> QuantileSet:
        return cls(ProbabilityGrid(probs), values, sample_size)

    @property
    def probs(self) -> np.ndarray:
        return self.grid.probs

    def __len__(self) -> int:
        return len(self.grid)


def _sample_quantiles(data: np.ndarray, probs: np.ndarray, qtype: int = 7) -> np.ndarray:
    """Sample quantiles along the last axis of ``data`` (shape ``(..., n)``)."""
    method = SAMPLE_QUANTILE_TYPES[qtype]
    return np.moveaxis(np.quantile(data, probs, axis=-1, method=method), 0, -1)


def sample_quantiles(data, grid: ProbabilityGrid | np.ndarray, qtype: int = 7) -> QuantileSet:
    """Estimate quantiles of ``data`` at the grid levels.

    The default ``qtype=7`` is the continuous linear interpolation between
    order statistics, ``(1 - g) x[j] + g x[j+1]`` with ``h = (n - 1) p``,
    ``j = floor(h)``, ``g = h - j`` (0-based order statistics).
    """
    grid = grid if isinstance(grid, ProbabilityGrid) else ProbabilityGrid(grid)
    data = np.asarray(data, dtype=float).ravel()
    if data.size < 2:
        raise PreconditionError("sample quantiles need at least two observations")
    if qtype not in SAMPLE_QUANTILE_TYPES:
        raise PreconditionError(f"unsupported sample quantile type {qtype}")
    return QuantileSet(grid, _sample_quantiles(data, grid.probs, qtype), sample_size=data.size)


def pit_transform(dist: Distribution, qs: QuantileSet) -> np.ndarray:
    """Probability integral transform ``F(Q_hat(p))`` of each quantile value."""
    u = np.asarray(dist.cdf(qs.values), dtype=float)
    bad = ~((u > 0) & (u < 1))
    if np.any(bad):
        k = int(np.argmax(bad))
        raise DomainError(f"quantile value {qs.values[k]!r} at index {k} lies on or outside the support of {dist.family}")
    return u


def brownian_bridge_cov(grid: ProbabilityGrid | np.ndarray) -> np.ndarray:
    """Covariance ``min(p_i, p_j) - p_i p_j`` of a Brownian bridge at the levels."""
    p = grid.probs if isinstance(grid, ProbabilityGrid) else ProbabilityGrid(grid).probs
    return np.minimum.outer(p, p) - np.outer(p, p)


def qclt_cov(dist: Distribution, grid: ProbabilityGrid | np.ndarray) -> np.ndarray:
    """Asymptotic covariance of ``sqrt(n) (Q_hat(p) - Q(p))``.

    Built from the quantile density: ``Gamma_ij q(p_i) q(p_j)``.
    """
    grid = grid if isinstance(grid, ProbabilityGrid) else ProbabilityGrid(grid)
    q = np.asarray(dist.qdf(grid.probs), dtype=float).reshape(-1)
    return brownian_bridge_cov(grid) * np.outer(q, q)


def cholesky(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, retrying once with diagonal jitter ``1e-10 * trace / K``."""
    cov = np.asarray(cov, dtype=float)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        k = cov.shape[-1]
        jitter = 1e-10 * np.trace(cov) / k
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(k))
        except np.linalg.LinAlgError as exc:
            raise NumericError("covariance matrix is not positive definite even after jitter") from exc


def read_quantile_csv(path: str | Path, sample_size: int | None = None) -> QuantileSet:
    """Read a two-column ``probability,value`` CSV; a ``p,q`` header row is optional."""
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 2:
                raise FormatError(f"{path}: line {i + 1} has {len(row)} columns, expected 2")
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if i == 0 and [c.strip().lower() for c in row] == ["p", "q"]:
                    continue
                raise FormatError(f"{path}: line {i + 1} is not numeric: {row}") from None
    if not rows:
        raise FormatError(f"{path}: no quantile rows")
    p, q = zip(*sorted(rows))
    return QuantileSet.from_arrays(p, q, sample_size)


def write_quantile_csv(qs: QuantileSet, path: str | Path, header: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(["p", "q"])
        for p, q in zip(qs.probs, qs.values):
            w.writerow([repr(float(p)), repr(float(q))])
