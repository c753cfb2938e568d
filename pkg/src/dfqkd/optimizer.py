"""Parameter search and distance sweeps.

Each protocol's key length is evaluated in closed form, vectorised over whole
parameter grids. :func:`optimize` scans a coarse grid (log-spaced for
intensities, linear for probabilities) and refines the best cell with a
bounded Nelder-Mead simplex in normalised coordinates.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import minimize

from .channel import GlobalParams, npp_expected_counts, scs_expected_counts
from .definetti import Mode
from .npp import decoy_bounds, npp_key_length, npp_key_terms, phase_correct_bound
from .results import NPP_DEFAULT_SPLIT, SCS_DEFAULT_SPLIT, EpsilonBudget, KeyRateResult
from .scs import (
    PERFECT_SOURCE,
    ScsSourceSpec,
    _estimate_phase_errors,
    coefficients,
    golden_section_max,
    ln_c0_default,
    scs_key_length,
    scs_key_terms,
)

log = logging.getLogger(__name__)

PARAM_NAMES = {"scs": ("mu", "p"), "npp": ("mu", "nu", "p", "p0")}
INTENSITIES = frozenset({"mu", "nu"})
SCS_MU_MAX = math.log(2.0)


@dataclass(frozen=True)
class SearchSpace:
    """Closed search intervals per parameter; equal endpoints pin a parameter.

    ``f_pe`` (the share of ``eps_tot`` given to parameter estimation) joins
    the search when ``tune_budget`` is set. ``c0_span`` is the half-width, in
    natural-log units around the default, of the optional ``c0`` search.
    """

    bounds: dict
    grid_points: int = 16
    max_refine: int = 200
    optimize_c0: bool = False
    c0_span: float = 2.0
    tune_budget: bool = False
    f_pe_bounds: tuple = (0.02, 0.9)

    @classmethod
    def scs(cls, **kw) -> "SearchSpace":
        # vacuum projection exp(-mu) >= 1/2 caps mu at ln 2
        return cls(bounds={"mu": (1e-4, SCS_MU_MAX), "p": (1e-3, 0.999)}, **kw)

    @classmethod
    def npp(cls, **kw) -> "SearchSpace":
        return cls(bounds={"mu": (1e-4, 1.0), "nu": (1e-4, 1.0),
                           "p": (1e-3, 0.999), "p0": (1e-3, 0.999)}, **kw)

    @classmethod
    def default(cls, protocol: str, **kw) -> "SearchSpace":
        return cls.scs(**kw) if protocol == "scs" else cls.npp(**kw)

    @classmethod
    def fixed(cls, params: dict, **kw) -> "SearchSpace":
        return cls(bounds={k: (float(v), float(v)) for k, v in params.items()}, **kw)

    def validate(self, protocol: str) -> None:
        needed = PARAM_NAMES[protocol]
        missing = [n for n in needed if n not in self.bounds]
        extra = [n for n in self.bounds if n not in needed]
        if missing or extra:
            raise ValueError(f"search space for {protocol} needs {needed}; "
                             f"missing={missing} unexpected={extra}")
        for name, (lo, hi) in self.bounds.items():
            if not lo <= hi:
                raise ValueError(f"empty interval for {name}: [{lo}, {hi}]")
            if name in INTENSITIES and not lo > 0:
                raise ValueError(f"{name} must be > 0")
            if protocol == "scs" and name == "mu" and hi > SCS_MU_MAX:
                raise ValueError(f"scs mu must be <= ln 2 (vacuum projection >= 1/2), got {hi}")
            if name in ("p", "p0") and not (0 < lo and hi < 1):
                raise ValueError(f"{name} interval must lie inside (0, 1)")
        if self.grid_points < 1 or self.max_refine < 0:
            raise ValueError("grid_points must be >= 1 and max_refine >= 0")

    def dims(self, protocol: str) -> dict:
        out = {n: tuple(self.bounds[n]) for n in PARAM_NAMES[protocol]}
        if self.tune_budget:
            out["f_pe"] = tuple(self.f_pe_bounds)
        return out


# ---------------------------------------------------------------------------
# vectorised evaluation
# ---------------------------------------------------------------------------

def make_budget(protocol: str, g: GlobalParams, mode: Mode = "exact",
                asymptotic: bool = False, f_pe=None) -> EpsilonBudget:
    """Default budget, or one whose estimation share is ``f_pe``.

    The rest of ``eps_tot`` keeps the default proportions between the other terms.
    """
    if asymptotic:
        return EpsilonBudget.asymptotic_limit(protocol)
    if protocol == "scs":
        split = SCS_DEFAULT_SPLIT
        if f_pe is not None:
            rest = 1.0 - np.asarray(f_pe, dtype=float)
            split = (rest / 3.0, rest / 3.0, rest / 6.0, f_pe)
        return EpsilonBudget.scs(g.eps_tot, g.N, mode, split)
    split = NPP_DEFAULT_SPLIT
    if f_pe is not None:
        rest = 1.0 - np.asarray(f_pe, dtype=float)
        split = (rest / 2.0, rest / 2.0, f_pe)
    return EpsilonBudget.npp(g.eps_tot, g.N, mode, split)


def _scs_raw(g, budget, mu, p, source, c0=None):
    obs = scs_expected_counts(g, mu, p)
    mu_A, mu_B = source.intensities(mu)
    c = coefficients(mu_A, mu_B, c0)
    n_ph, _ = _estimate_phase_errors(obs, g.N, p, c, budget.t0)
    return scs_key_terms(obs, n_ph, g.f, budget)[0]


def _npp_raw(g, budget, mu, nu, p, p0):
    obs = npp_expected_counts(g, mu, nu, p, p0)
    q = decoy_bounds(obs, g.N, p, p0, nu, budget.t0)
    P_cor = phase_correct_bound(q.q01_lower, q.q10_lower, mu, p)
    return npp_key_terms(obs, P_cor, g.N, g.f, budget)[0]


def key_length_raw(protocol: str, g: GlobalParams, values: dict, mode: Mode = "exact",
                   asymptotic: bool = False, source: ScsSourceSpec = PERFECT_SOURCE,
                   c0=None):
    """Unfloored key length for broadcastable parameter arrays in ``values``."""
    budget = make_budget(protocol, g, mode, asymptotic, values.get("f_pe"))
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        if protocol == "scs":
            out = _scs_raw(g, budget, values["mu"], values["p"], source, c0)
        else:
            out = _npp_raw(g, budget, values["mu"], values["nu"], values["p"], values["p0"])
    out = np.asarray(out, dtype=float)
    return np.where(np.isnan(out), -np.inf, out)


def evaluate(protocol: str, g: GlobalParams, params: dict, mode: Mode = "exact",
             asymptotic: bool = False, source: ScsSourceSpec = PERFECT_SOURCE,
             c0: float | None = None) -> KeyRateResult:
    """Full diagnostic evaluation at one parameter point."""
    params = {k: float(v) for k, v in params.items()}
    budget = make_budget(protocol, g, mode, asymptotic, params.get("f_pe"))
    if protocol == "scs":
        obs = scs_expected_counts(g, params["mu"], params["p"])
        mu_A, mu_B = source.intensities(params["mu"])
        c = coefficients(mu_A, mu_B, c0)
        n_ph, clamps = _estimate_phase_errors(obs, g.N, params["p"], c, budget.t0)
        res = scs_key_length(obs, n_ph, g, budget, params={**params, "c0": c.c0})
        res.clamps_hit[:0] = clamps
        res.terms.update(mu_A=c.mu_A, mu_B=c.mu_B, c_bar2=c.c_bar2)
    elif protocol == "npp":
        obs = npp_expected_counts(g, params["mu"], params["nu"], params["p"], params["p0"])
        q = decoy_bounds(obs, g.N, params["p"], params["p0"], params["nu"], budget.t0)
        P_cor = phase_correct_bound(q.q01_lower, q.q10_lower, params["mu"], params["p"])
        res = npp_key_length(obs, P_cor, g.N, g, budget, params=params)
        res.terms.update(q01_lower=q.q01_lower, q10_lower=q.q10_lower)
        if q.q01_lower == 0.0 or q.q10_lower == 0.0:
            res.clamps_hit.insert(0, "q_lower>=0")
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    res.L = g.L
    return res


# ---------------------------------------------------------------------------
# search
# ---------------------------------------------------------------------------

class _Coords:
    """Maps free parameters to the unit cube (log scale for intensities)."""

    def __init__(self, dims: dict):
        self.names = list(dims)
        self.dims = dims
        self.free = [n for n in self.names if dims[n][0] < dims[n][1]]

    def _is_log(self, name):
        return name in INTENSITIES

    def axis(self, name, n):
        lo, hi = self.dims[name]
        if lo == hi:
            return np.array([lo])
        if self._is_log(name):
            return np.geomspace(lo, hi, n)
        return np.linspace(lo, hi, n)

    def to_values(self, u) -> dict:
        vals = {n: self.dims[n][0] for n in self.names}
        for n, ui in zip(self.free, np.clip(u, 0.0, 1.0)):
            lo, hi = self.dims[n]
            if self._is_log(n):
                vals[n] = math.exp(math.log(lo) + ui * (math.log(hi) - math.log(lo)))
            else:
                vals[n] = lo + ui * (hi - lo)
        return vals

    def to_unit(self, values: dict) -> np.ndarray:
        out = []
        for n in self.free:
            lo, hi = self.dims[n]
            v = min(max(values[n], lo), hi)
            if self._is_log(n):
                out.append((math.log(v) - math.log(lo)) / (math.log(hi) - math.log(lo)))
            else:
                out.append((v - lo) / (hi - lo))
        return np.array(out)


def optimize(protocol: str, g: GlobalParams, space: SearchSpace | None = None,
             mode: Mode = "exact", asymptotic: bool = False,
             source: ScsSourceSpec = PERFECT_SOURCE,
             candidates: Iterable[dict] = ()) -> KeyRateResult:
    """Maximise the key rate over ``space``.

    ``candidates`` are extra parameter points scored alongside the grid (for
    warm starts); they can only improve the result. A result whose best key
    length is zero carries the ``zero_key`` clamp instead of raising.
    """
    space = space or SearchSpace.default(protocol)
    space.validate(protocol)
    coords = _Coords(space.dims(protocol))

    def score(values):
        return key_length_raw(protocol, g, values, mode, asymptotic, source)

    axes = [coords.axis(n, space.grid_points) for n in coords.names]
    mesh = np.meshgrid(*axes, indexing="ij")
    grid_vals = dict(zip(coords.names, mesh))
    l_grid = np.broadcast_to(score(grid_vals), mesh[0].shape)
    flat = int(np.argmax(l_grid))
    best_vals = {n: float(m.flat[flat]) for n, m in grid_vals.items()}
    best_l = float(l_grid.flat[flat])

    for cand in candidates:
        vals = coords.to_values(coords.to_unit({**best_vals, **cand}))
        l_c = float(score(vals))
        if l_c > best_l:
            best_vals, best_l = vals, l_c

    if coords.free and space.max_refine > 0:
        best_vals, best_l = _refine(coords, score, best_vals, best_l, space)

    c0 = None
    if protocol == "scs" and space.optimize_c0:
        c0, best_l = _tune_c0(g, best_vals, best_l, mode, asymptotic, source, space.c0_span)

    res = evaluate(protocol, g, best_vals, mode, asymptotic, source, c0)
    if res.zero_key:
        res.clamps_hit.append("zero_key")
    return res


def _refine(coords: _Coords, score, best_vals, best_l, space: SearchSpace):
    u0 = coords.to_unit(best_vals)
    d = len(u0)
    step = 1.0 / max(space.grid_points - 1, 1)
    simplex = [u0]
    for i in range(d):
        v = u0.copy()
        v[i] = v[i] + step if v[i] + step <= 1.0 else v[i] - step
        simplex.append(v)
    scale = max(abs(best_l), 1.0)

    def fun(u):
        val = float(score(coords.to_values(u)))
        return -val / scale if np.isfinite(val) else 1e300

    res = minimize(fun, u0, method="Nelder-Mead", bounds=[(0.0, 1.0)] * d,
                   options={"maxfev": space.max_refine, "initial_simplex": np.array(simplex),
                            "xatol": 1e-7, "fatol": 1e-10})
    l_ref = -res.fun * scale
    if l_ref > best_l:
        return coords.to_values(res.x), float(l_ref)
    return best_vals, best_l


def _tune_c0(g, values, best_l, mode, asymptotic, source, span):
    mu_A, mu_B = source.intensities(values["mu"])
    centre = ln_c0_default(mu_A, mu_B)

    def fun(ln_c0):
        return float(key_length_raw("scs", g, values, mode, asymptotic, source, math.exp(ln_c0)))

    x, fx = golden_section_max(fun, centre - span, centre + span)
    if fx > best_l:
        return math.exp(x), fx
    return None, best_l


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def _sweep_distance(protocol, g_template, L, N_values, space, mode, asymptotic, source):
    # The asymptotic key length bounds every finite-N one at fixed parameters,
    # so when it is zero the finite cells only need the coarse grid.
    asym = optimize(protocol, g_template.with_(L=float(L)), space, mode, True, source)
    finite_space = replace(space, max_refine=0) if asym.zero_key else space
    rows = []
    prev = []
    for N in sorted(N_values):
        g = g_template.with_(L=float(L), N=int(N))
        res = optimize(protocol, g, finite_space, mode, False, source, candidates=prev)
        rows.append(res)
        prev = prev + [_search_params(res)]
    if asymptotic:
        g = g_template.with_(L=float(L))
        for cand in prev:
            alt = evaluate(protocol, g, cand, mode, True, source)
            if alt.l > asym.l:
                asym = alt
        rows.append(asym)
    return rows


def _search_params(res: KeyRateResult) -> dict:
    return {k: v for k, v in res.params.items() if k != "c0"}


def sweep(protocol: str, g_template: GlobalParams, distances: Sequence[float],
          N_values: Sequence[int], space: SearchSpace | None = None, mode: Mode = "exact",
          asymptotic: bool = True, source: ScsSourceSpec = PERFECT_SOURCE,
          n_jobs: int | None = 1) -> list[KeyRateResult]:
    """One optimised result per (L, N), plus an asymptotic row per L if requested.

    Within a distance, finite-N cells run in increasing N and each warm-starts
    from the optima of smaller N; the asymptotic cell warm-starts from all of
    them. Distances are independent and may run in parallel; row order is
    always distance-major, then N ascending, then the asymptotic row.
    """
    space = space or SearchSpace.default(protocol)
    distances = list(distances)
    if not distances:
        return []
    jobs = (delayed(_sweep_distance)(protocol, g_template, L, N_values, space, mode,
                                     asymptotic, source) for L in distances)
    groups = Parallel(n_jobs=n_jobs)(jobs) if n_jobs not in (None, 1) else [
        _sweep_distance(protocol, g_template, L, N_values, space, mode, asymptotic, source)
        for L in distances]
    return [row for group in groups for row in group]
