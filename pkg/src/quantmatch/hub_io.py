"""Reading forecast-hub quantile submissions and truth series.

A hub CSV has one row per (forecast, level) with at least the columns
``reference_date, horizon, target_end_date, location, output_type,
output_type_id, value``. Optional ``model_id`` and ``target`` columns are
kept in the forecast key. Rows whose ``output_type`` is not ``quantile``
are skipped; malformed quantile rows are collected in a rejects report.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .empirical import ProbabilityGrid, QuantileSet
from .errors import FormatError, UnusableForecastError

__all__ = [
    "CANONICAL_LEVELS",
    "HubForecast",
    "HubParseResult",
    "Reject",
    "TruthSeries",
    "canonical_grid",
    "parse_hub_csv",
    "preprocess",
    "read_truth_csv",
    "write_hub_csv",
]

# 0.01, 0.025, 0.05, 0.10, 0.15, ..., 0.90, 0.95, 0.975, 0.99
CANONICAL_LEVELS = np.round(np.concatenate([[0.01, 0.025], np.arange(1, 20) * 0.05, [0.975, 0.99]]), 10)

REQUIRED_COLUMNS = ("reference_date", "horizon", "target_end_date", "location", "output_type", "output_type_id", "value")
KEY_FIELDS = ("team", "target", "location", "reference_date", "horizon", "target_end_date")
MONOTONE_TOL = 1e-9


def canonical_grid() -> ProbabilityGrid:
    """The 23 forecast-hub quantile levels, symmetric about 0.5."""
    return ProbabilityGrid(CANONICAL_LEVELS)


def _canonical_level(p: float) -> float | None:
    k = int(np.argmin(np.abs(CANONICAL_LEVELS - p)))
    return float(CANONICAL_LEVELS[k]) if abs(CANONICAL_LEVELS[k] - p) < 1e-9 else None


@dataclass(frozen=True, eq=False)
class HubForecast:
    """One submitted quantile forecast, values on the original count scale.

    ``probs`` and ``values`` are sorted by level; values are kept exactly as
    submitted, so they may violate monotonicity until :func:`preprocess`.
    """

    team: str
    location: str
    reference_date: dt.date
    horizon: int
    target_end_date: dt.date
    probs: np.ndarray
    values: np.ndarray
    target: str = ""

    def __post_init__(self):
        for name in ("probs", "values"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def key(self) -> tuple[str, ...]:
        return (
            self.team,
            self.target,
            self.location,
            self.reference_date.isoformat(),
            str(self.horizon),
            self.target_end_date.isoformat(),
        )

    def __len__(self) -> int:
        return self.probs.size

    def quantile_set(self) -> QuantileSet:
        """The raw forecast as a QuantileSet (no transform, no level removal)."""
        return QuantileSet.from_arrays(self.probs, self.values)


@dataclass(frozen=True)
class Reject:
    line: int
    reason: str


@dataclass
class HubParseResult:
    forecasts: list[HubForecast] = field(default_factory=list)
    rejects: list[Reject] = field(default_factory=list)
    skipped_non_quantile: int = 0
    warnings: list[str] = field(default_factory=list)


def _parse_date(text: str) -> dt.date:
    return dt.date.fromisoformat(text.strip())


def _team_from_path(path: Path) -> str:
    # hub submissions are named YYYY-MM-DD-team-model.csv
    m = re.fullmatch(r"\d{4}-\d{2}-\d{2}-(.+)", path.stem)
    return m.group(1) if m else path.stem


def parse_hub_csv(path: str | Path, team: str | None = None) -> HubParseResult:
    """Group the quantile rows of a hub CSV into forecasts.

    The team comes from a ``model_id`` column when present, else from
    ``team`` or the file name. Rows with unparsable fields, negative values
    or levels outside the canonical 23 are rejected with a reason; a
    repeated (forecast, level) pair is a format error.
    """
    path = Path(path)
    default_team = team or _team_from_path(path)
    result = HubParseResult()
    groups: dict[tuple, dict[float, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise FormatError(f"{path}: empty file")
        cols = [c.strip() for c in reader.fieldnames]
        missing = [c for c in REQUIRED_COLUMNS if c not in cols]
        if missing:
            raise FormatError(f"{path}: missing required column(s) {', '.join(missing)}")
        reader.fieldnames = cols
        nrows = 0
        for i, row in enumerate(reader, start=2):
            nrows += 1
            if (row.get("output_type") or "").strip() != "quantile":
                result.skipped_non_quantile += 1
                continue
            try:
                ref = _parse_date(row["reference_date"])
                end = _parse_date(row["target_end_date"])
                horizon = int(row["horizon"])
                location = row["location"].strip()
                level = float(row["output_type_id"])
                value = float(row["value"])
            except (ValueError, TypeError, AttributeError) as exc:
                result.rejects.append(Reject(i, f"unparsable field: {exc}"))
                continue
            if not location:
                result.rejects.append(Reject(i, "empty location"))
                continue
            if not math.isfinite(value) or value < 0:
                result.rejects.append(Reject(i, f"quantile value {value!r} is negative or not finite"))
                continue
            canon = _canonical_level(level)
            if canon is None:
                result.rejects.append(Reject(i, f"level {level!r} is not one of the 23 hub levels"))
                continue
            row_team = (row.get("model_id") or "").strip() or default_team
            target = (row.get("target") or "").strip()
            key = (row_team, target, location, ref, horizon, end)
            g = groups.setdefault(key, {})
            if canon in g:
                raise FormatError(f"{path}: duplicate level {canon} for forecast {_key_text(key)} (line {i})")
            g[canon] = value
    if nrows == 0:
        raise FormatError(f"{path}: no data rows")
    for key, g in groups.items():
        row_team, target, location, ref, horizon, end = key
        probs = np.array(sorted(g))
        values = np.array([g[p] for p in probs])
        if 0.5 not in g:
            msg = f"forecast {_key_text(key)} has no median (level 0.5); it cannot be scored by WIS"
            result.warnings.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
        result.forecasts.append(HubForecast(row_team, location, ref, horizon, end, probs, values, target))
    return result


def _key_text(key) -> str:
    team, target, location, ref, horizon, end = key
    parts = [team] + ([target] if target else []) + [location, str(ref), f"h{horizon}", str(end)]
    return "/".join(parts)


def preprocess(f: HubForecast, tol: float = MONOTONE_TOL) -> QuantileSet:
    """Forecast prepared for fitting: zero values dropped, then ``log(value + 1)``.

    Decreases between consecutive values of at most ``tol`` are flattened;
    larger ones make the forecast unusable, as does keeping fewer than two
    levels.
    """
    keep = f.values != 0
    probs, values = f.probs[keep], f.values[keep]
    if probs.size < 2:
        raise UnusableForecastError(f"forecast {_key_text(_raw_key(f))} keeps {probs.size} nonzero quantile(s)")
    y = np.log1p(values)
    d = np.diff(y)
    if np.any(d < -tol):
        k = int(np.argmax(d < -tol))
        raise UnusableForecastError(
            f"forecast {_key_text(_raw_key(f))} decreases between levels {probs[k]} and {probs[k + 1]}"
        )
    y = np.maximum.accumulate(y)
    return QuantileSet.from_arrays(probs, y)


def _raw_key(f: HubForecast):
    return (f.team, f.target, f.location, f.reference_date, f.horizon, f.target_end_date)


def write_hub_csv(forecasts: list[HubForecast], path: str | Path) -> None:
    """Write forecasts back in hub format (with ``model_id`` and ``target`` columns)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model_id", "target", *REQUIRED_COLUMNS])
        for f in forecasts:
            for p, v in zip(f.probs, f.values):
                w.writerow(
                    [
                        f.team,
                        f.target,
                        f.reference_date.isoformat(),
                        f.horizon,
                        f.target_end_date.isoformat(),
                        f.location,
                        "quantile",
                        repr(float(p)),
                        repr(float(v)),
                    ]
                )


@dataclass(frozen=True)
class TruthSeries:
    """Observed weekly counts: ``counts[location][date]``."""

    counts: dict[str, dict[dt.date, int]]

    def get(self, location: str, date: dt.date) -> int | None:
        return self.counts.get(location, {}).get(date)

    def __len__(self) -> int:
        return sum(len(v) for v in self.counts.values())


def read_truth_csv(path: str | Path) -> TruthSeries:
    """Read ``date, location, value`` rows (``target_end_date`` is accepted for ``date``)."""
    path = Path(path)
    counts: dict[str, dict[dt.date, int]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise FormatError(f"{path}: empty file")
        cols = [c.strip() for c in reader.fieldnames]
        reader.fieldnames = cols
        date_col = "date" if "date" in cols else "target_end_date" if "target_end_date" in cols else None
        if date_col is None or "location" not in cols or "value" not in cols:
            raise FormatError(f"{path}: truth file needs date, location and value columns")
        for i, row in enumerate(reader, start=2):
            try:
                date = _parse_date(row[date_col])
                value = float(row["value"])
            except (ValueError, TypeError, AttributeError):
                raise FormatError(f"{path}: line {i} is malformed: {row}") from None
            if value < 0 or value != int(value):
                raise FormatError(f"{path}: line {i}: count {row['value']!r} is not a nonnegative integer")
            loc = row["location"].strip()
            series = counts.setdefault(loc, {})
            if date in series:
                raise FormatError(f"{path}: line {i}: duplicate truth for {loc} on {date}")
            series[date] = int(value)
    if not counts:
        raise FormatError(f"{path}: no truth rows")
    return TruthSeries(counts)
