"""Key-value configuration files for models, samplers and studies.

Files use INI syntax. A model file has a ``[model]`` section, optional
``[priors]`` (one ``group = prior`` line each) and optional ``[mcmc]``::

    [model]
    kind = QGP_PIT
    family = NormalMixture
    components = 4
    n_known = false

    [priors]
    mu = normal(5, 7)

    [mcmc]
    total_draws = 80000
    burn_in = 20000

A study file has a ``[study]`` section plus the optional ``[priors]`` and
``[mcmc]`` sections; see :func:`study_from_config` for its keys.
"""

from __future__ import annotations

import configparser
from pathlib import Path

import numpy as np

from .distributions import parse_distribution
from .errors import FormatError, PreconditionError
from .inference import McmcConfig
from .likelihoods import ModelSpec, PriorSpec, parse_prior

__all__ = [
    "read_config",
    "parse_bool",
    "parse_list",
    "priors_from_config",
    "mcmc_from_config",
    "model_from_config",
    "model_to_config",
]

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def read_config(path: str | Path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    path = Path(path)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise FormatError(f"{path}: {exc}") from None
    return cp


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise FormatError(f"not a boolean: {text!r}")


def parse_list(text: str, conv=str) -> list:
    try:
        return [conv(t.strip()) for t in text.split(",") if t.strip()]
    except ValueError:
        raise FormatError(f"cannot parse list {text!r}") from None


def priors_from_config(cp: configparser.ConfigParser) -> PriorSpec:
    if not cp.has_section("priors"):
        return PriorSpec()
    return PriorSpec({k: parse_prior(v) for k, v in cp.items("priors")})


_MCMC_INT_KEYS = ("total_draws", "burn_in", "thin", "seed", "adapt_interval", "init_retries")


def mcmc_from_config(cp: configparser.ConfigParser, base: McmcConfig | None = None) -> McmcConfig:
    """Sampler settings from ``[mcmc]``, overriding ``base`` (or the defaults)."""
    kw = {}
    if base is not None:
        kw = {k: getattr(base, k) for k in McmcConfig.__dataclass_fields__}
    if cp.has_section("mcmc"):
        for key, value in cp.items("mcmc"):
            if key in _MCMC_INT_KEYS:
                kw[key] = _int(value, key)
            elif key in ("window_start", "target_accept"):
                kw[key] = float(value)
            elif key == "predictive_thin":
                continue
            else:
                raise FormatError(f"unknown [mcmc] key {key!r}")
    return McmcConfig(**kw)


def _int(value: str, key: str) -> int:
    try:
        f = float(value)
    except ValueError:
        raise FormatError(f"{key}: expected an integer, got {value!r}") from None
    if f != int(f):
        raise FormatError(f"{key}: expected an integer, got {value!r}")
    return int(f)


def model_from_config(cp: configparser.ConfigParser, section: str = "model") -> ModelSpec:
    if not cp.has_section(section):
        raise FormatError(f"missing [{section}] section")
    s = cp[section]
    known = {"kind", "family", "n_known", "n", "components"}
    unknown = set(s) - known
    if unknown:
        raise FormatError(f"unknown [{section}] key(s): {', '.join(sorted(unknown))}")
    try:
        return ModelSpec(
            kind=s.get("kind", "QGP_PIT"),
            family=s.get("family", "Normal"),
            n_known=parse_bool(s.get("n_known", "true")),
            n=float(s["n"]) if "n" in s else None,
            components=_int(s.get("components", "1"), "components"),
            priors=priors_from_config(cp),
        )
    except ValueError as exc:
        if isinstance(exc, (FormatError, PreconditionError)):
            raise
        raise FormatError(f"[{section}]: {exc}") from None


def model_to_config(model: ModelSpec) -> str:
    """Serialize a model (with its priors) to the INI text read by :func:`model_from_config`."""
    lines = ["[model]", f"kind = {model.kind.value}", f"family = {model.family}", f"n_known = {str(model.n_known).lower()}"]
    if model.n is not None:
        lines.append(f"n = {model.n!r}")
    lines.append(f"components = {model.components}")
    lines += ["", "[priors]"] + model.priors.to_lines()
    return "\n".join(lines) + "\n"


def parse_levels(text: str) -> np.ndarray:
    """``canonical`` for the 23 hub levels, ``uniform:K`` for ``k / (K + 1)``, or a list."""
    from .hub_io import CANONICAL_LEVELS

    t = text.strip().lower()
    if t == "canonical":
        return CANONICAL_LEVELS.copy()
    if t.startswith("uniform:"):
        K = _int(t.split(":", 1)[1], "levels")
        return np.arange(1, K + 1) / (K + 1)
    return np.array(parse_list(text, float))


def parse_truth(text: str):
    return parse_distribution(text)
