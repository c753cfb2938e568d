"""Run configuration: INI file sections, command-line overrides, validation.

File layout (every key optional)::

    [global]    p_d, e_d, eta_d, f, alpha_f, eps_tot
    [search]    mu, nu, p, p0 (as "lo, hi"), grid_points, max_refine,
                optimize_c0, tune_budget
    [source]    a_v0, b_v0, a0, b0            (SCS only)
    [params]    mu, nu, p, p0, c0             (fixed point for ``eval``)
    [run]       mode, asymptotic, N, L, output, jobs
    [validate]  rounds, seed, seeds

Unknown sections or keys raise :class:`ConfigError` naming the offender.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

import numpy as np

from .channel import GlobalParams
from .numerics import DomainError, LogEps
from .optimizer import PARAM_NAMES, SearchSpace
from .scs import ScsSourceSpec

OUTPUT_ENV = "DFQKD_OUTPUT_DIR"

SCHEMA = {
    "global": {"p_d", "e_d", "eta_d", "f", "alpha_f", "eps_tot"},
    "search": {"mu", "nu", "p", "p0", "grid_points", "max_refine", "optimize_c0",
               "tune_budget"},
    "source": {"a_v0", "b_v0", "a0", "b0"},
    "params": {"mu", "nu", "p", "p0", "c0"},
    "run": {"mode", "asymptotic", "N", "L", "output", "jobs"},
    "validate": {"rounds", "seed", "seeds"},
}

# Preset name -> [global] values; "table1" is the GlobalParams defaults.
PRESETS = {"table1": {}}


class ConfigError(ValueError):
    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


@dataclass
class RunConfig:
    protocol: str
    global_params: GlobalParams
    space: SearchSpace
    source: ScsSourceSpec = field(default_factory=ScsSourceSpec)
    params: dict = field(default_factory=dict)
    mode: str = "exact"
    asymptotic: bool = True
    N_values: list = field(default_factory=lambda: [10**12, 10**13, 10**14])
    distances: list = field(default_factory=lambda: [float(x) for x in range(0, 500, 10)])
    output: str = "."
    jobs: int = 1
    rounds: int = 10**6
    seed: int = 0
    seeds: int = 20


def parse_number(text: str) -> float:
    return float(str(text).strip())


def parse_int(text) -> int:
    v = float(str(text).strip())
    if v != int(v):
        raise ValueError(f"not an integer: {text!r}")
    return int(v)


def parse_list(text: str, conv=parse_number) -> list:
    return [conv(t) for t in str(text).split(",") if t.strip()]


def parse_range(text: str) -> list:
    """``start:stop:step`` (stop exclusive) or a comma list."""
    text = str(text).strip()
    if ":" in text:
        parts = [float(t) for t in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ValueError(f"expected start:stop:step, got {text!r}")
        start, stop, step = parts
        n = int(np.ceil((stop - start) / step - 1e-9))
        return [float(start + i * step) for i in range(max(n, 0))]
    return parse_list(text)


def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_ini(path: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError("config", str(exc)) from exc
    return {s: dict(parser.items(s)) for s in parser.sections()}


def check_schema(data: dict) -> None:
    for section, items in data.items():
        if section not in SCHEMA:
            raise ConfigError(section, "unknown section")
        for key in items:
            if key not in SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")


def merge(file_data: dict, overrides: dict) -> dict:
    """Overlay ``{section: {key: value}}`` overrides (``None`` values skipped)."""
    out = {s: dict(v) for s, v in file_data.items()}
    for section, items in overrides.items():
        for key, value in items.items():
            if value is not None:
                out.setdefault(section, {})[key] = value
    return out


def _convert(key, fn, value):
    try:
        return fn(value)
    except (ValueError, TypeError, DomainError) as exc:
        raise ConfigError(key, str(exc)) from exc


def build(protocol: str, data: dict, output: str | None = None) -> RunConfig:
    """Validate merged key-value data and build a :class:`RunConfig`.

    The output directory resolves as: ``output`` argument, then the
    ``DFQKD_OUTPUT_DIR`` environment variable, then ``run.output``.
    """
    if protocol not in PARAM_NAMES:
        raise ConfigError("protocol", f"unknown protocol {protocol!r}")
    check_schema(data)
    gl = data.get("global", {})
    gkw = {k: _convert(f"global.{k}", parse_number, v) for k, v in gl.items() if k != "eps_tot"}
    if "eps_tot" in gl:
        gkw["eps_tot"] = _convert("global.eps_tot",
                                  lambda v: LogEps.from_eps(parse_number(v)), gl["eps_tot"])
    g = _convert("global", lambda kw: GlobalParams(**kw), gkw)

    se = data.get("search", {})
    default = SearchSpace.default(protocol)
    bounds = dict(default.bounds)
    for name in ("mu", "nu", "p", "p0"):
        if name in se:
            if name not in PARAM_NAMES[protocol]:
                raise ConfigError(f"search.{name}", f"not a {protocol} parameter")
            lims = _convert(f"search.{name}", parse_list, se[name])
            if len(lims) == 1:
                lims = lims * 2
            if len(lims) != 2:
                raise ConfigError(f"search.{name}", "expected 'lo, hi'")
            bounds[name] = tuple(lims)
    space = SearchSpace(
        bounds=bounds,
        grid_points=_convert("search.grid_points", parse_int, se.get("grid_points", 16)),
        max_refine=_convert("search.max_refine", parse_int, se.get("max_refine", 200)),
        optimize_c0=_convert("search.optimize_c0", parse_bool, se.get("optimize_c0", False)),
        tune_budget=_convert("search.tune_budget", parse_bool, se.get("tune_budget", False)),
    )
    _convert("search", space.validate, protocol)

    src = data.get("source", {})
    if src and protocol != "scs":
        raise ConfigError("source", "only valid for the scs protocol")
    source = _convert("source", lambda kw: ScsSourceSpec(**kw),
                      {k: _convert(f"source.{k}", parse_number, v) for k, v in src.items()})

    params = {}
    for k, v in data.get("params", {}).items():
        if k != "c0" and k not in PARAM_NAMES[protocol]:
            raise ConfigError(f"params.{k}", f"not a {protocol} parameter")
        params[k] = _convert(f"params.{k}", parse_number, v)

    run = data.get("run", {})
    mode = str(run.get("mode", "exact"))
    if mode not in ("exact", "paper-bound"):
        raise ConfigError("run.mode", "must be 'exact' or 'paper-bound'")
    cfg = RunConfig(protocol=protocol, global_params=g, space=space, source=source,
                    params=params, mode=mode)
    cfg.asymptotic = _convert("run.asymptotic", parse_bool, run.get("asymptotic", True))
    if "N" in run:
        cfg.N_values = _convert("run.N", lambda v: parse_list(v, parse_int), run["N"])
        if not cfg.N_values or min(cfg.N_values) < 1:
            raise ConfigError("run.N", "need at least one N >= 1")
    if "L" in run:
        cfg.distances = _convert("run.L", parse_range, run["L"])
        if any(d < 0 for d in cfg.distances):
            raise ConfigError("run.L", "distances must be >= 0")
    cfg.jobs = _convert("run.jobs", parse_int, run.get("jobs", 1))
    cfg.output = str(output or os.environ.get(OUTPUT_ENV) or run.get("output") or ".")

    va = data.get("validate", {})
    cfg.rounds = _convert("validate.rounds", parse_int, va.get("rounds", cfg.rounds))
    cfg.seed = _convert("validate.seed", parse_int, va.get("seed", cfg.seed))
    cfg.seeds = _convert("validate.seeds", parse_int, va.get("seeds", cfg.seeds))
    if cfg.rounds < 0 or cfg.seeds < 1:
        raise ConfigError("validate", "rounds must be >= 0 and seeds >= 1")
    return cfg
