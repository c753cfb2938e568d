"""Finite-key analysis of no-phase-postselection twin-field QKD.

Three intensities: signal ``mu`` with phases {0, pi}, and phase-randomised
decoys {0, nu}. The decoy source is replaced by a finite-dimensional virtual
source holding vacuum, one photon, or a flag state orthogonal to every Fock
state with weights ``exp(-nu)``, ``nu exp(-nu)`` and the remainder. That
replacement fixes the decoy coefficients below and the total dimension
(6 x 6 x 3 = 108) used by the de Finetti penalty.

Click rates from the flag state are unknown and taken as 1 (worst case),
as are the click rates of the residual even/odd photon-number components in
the phase-correct bound.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .concentration import Cher_lower, Cher_upper, cher_lower
from .numerics import DomainError, h2
from .results import EpsilonBudget, KeyRateResult

if TYPE_CHECKING:
    from .channel import GlobalParams


@dataclass(frozen=True)
class NppObservation:
    n_00: float
    n_0nu: float
    n_nu0: float
    n_s: float
    e_bit: float

    def __post_init__(self):
        for name in ("n_00", "n_0nu", "n_nu0", "n_s"):
            if np.any(np.asarray(getattr(self, name)) < 0):
                raise DomainError(f"{name} must be >= 0")
        e = np.asarray(self.e_bit)
        if np.any((e < 0) | (e > 1)):
            raise DomainError("e_bit must lie in [0, 1]")


@dataclass(frozen=True)
class NppDecoyBounds:
    q01_lower: float
    q10_lower: float


def decoy_weights(nu):
    """Vacuum, single-photon and flag-state weights of the virtual decoy source."""
    nu = np.asarray(nu, dtype=float)
    w0 = np.exp(-nu)
    w1 = nu * w0
    # 1 - e^-nu - nu e^-nu, cancellation-free for small nu
    w2 = -np.expm1(-nu) - w1
    return w0, w1, w2


def decoy_bounds(obs: NppObservation, N: int, p, p0, nu, t0) -> NppDecoyBounds:
    """Lower bounds on the single-photon click rates ``q01`` and ``q10``."""
    p, p0, nu = (np.asarray(v, dtype=float) for v in (p, p0, nu))
    if np.any(~((p > 0) & (p < 1))) or np.any(~((p0 > 0) & (p0 < 1))) or np.any(~(nu > 0)):
        raise DomainError("decoy bounds need 0 < p, p0 < 1 and nu > 0")
    N = float(N)
    w0, w1, w2 = decoy_weights(nu)
    vac_rounds = N * (1 - p) ** 2 * p0**2
    mixed_rounds = N * (1 - p) ** 2 * p0 * (1 - p0)
    q00_upper = np.asarray(Cher_upper(obs.n_00, t0)) / vac_rounds

    def one(n_mixed):
        y = np.asarray(Cher_lower(n_mixed, t0)) / mixed_rounds
        q = (y - w0 * q00_upper - w2) / w1
        q = np.clip(q, 0.0, 1.0)
        return float(q) if q.ndim == 0 else q

    return NppDecoyBounds(one(obs.n_0nu), one(obs.n_nu0))


def _sinh_cosh_minus(mu):
    """sinh(mu) cosh(mu) - mu, accurate for small mu."""
    mu = np.asarray(mu, dtype=float)
    x = 2.0 * mu
    # sinh(x)/2 - x/2 = sum_{k>=1} x^(2k+1) / (2 (2k+1)!)
    x2 = x * x
    series = x * x2 / 12.0 * (1.0 + x2 / 20.0 * (1.0 + x2 / 42.0 * (1.0 + x2 / 72.0 * (1.0 + x2 / 110.0))))
    direct = 0.5 * np.sinh(x) - mu
    return np.where(mu < 0.05, series, direct)


def phase_correct_coefficients(mu):
    """``(A, B)``: amplitudes of the single-photon and residual components."""
    mu = np.asarray(mu, dtype=float)
    e2 = np.exp(-2.0 * mu)
    return np.sqrt(e2 * mu), np.sqrt(e2 * _sinh_cosh_minus(mu))


def phase_correct_bound(q01_lower, q10_lower, mu, p):
    """Lower bound on the per-round phase-correct probability."""
    q01, q10, mu, p = (np.asarray(v, dtype=float) for v in (q01_lower, q10_lower, mu, p))
    if np.any((q01 < 0) | (q01 > 1) | (q10 < 0) | (q10 > 1)):
        raise DomainError("click rates must lie in [0, 1]")
    if np.any(~(mu > 0)):
        raise DomainError("mu must be > 0")
    A, B = phase_correct_coefficients(mu)
    left = np.maximum(A * np.sqrt(q01) - B, 0.0)
    right = np.maximum(A * np.sqrt(q10) - B, 0.0)
    out = p**2 * (left**2 + right**2)
    return float(out) if out.ndim == 0 else out


def npp_key_terms(obs: NppObservation, P_cor, N: int, f: float, budget: EpsilonBudget, t0=None):
    """Unfloored key length, named terms and clamps (array friendly)."""
    t0 = budget.t0 if t0 is None else t0
    n_s = np.asarray(obs.n_s, dtype=float)
    clamps = []
    n_cor_raw = np.asarray(cher_lower(float(N) * np.asarray(P_cor), t0))
    if np.any(n_cor_raw > n_s):
        clamps.append("n_cor<=n_s")
    n_cor = np.minimum(n_cor_raw, n_s)
    with np.errstate(invalid="ignore", divide="ignore"):
        e_ph = np.where(n_s > 0, 1.0 - n_cor / np.where(n_s > 0, n_s, 1.0), 0.5)
    if np.any(e_ph > 0.5):
        clamps.append("phase_error_rate<=1/2")
    e_ph = np.clip(e_ph, 0.0, 0.5)
    terms = {
        "phase_error": n_s * h2(e_ph),
        "ec_leak": f * n_s * h2(obs.e_bit),
    }
    terms.update(budget.log2_constants())
    l_raw = n_s - sum(terms.values())
    return l_raw, terms, clamps, n_cor


def npp_key_length(obs: NppObservation, P_cor: float, N: int, g: "GlobalParams",
                   budget: EpsilonBudget, t0=None, params: dict | None = None) -> KeyRateResult:
    """Secure key length, floored at zero, with a per-term breakdown."""
    l_raw, terms, clamps, n_cor = npp_key_terms(obs, P_cor, N, g.f, budget, t0)
    l_raw = float(l_raw)
    if obs.n_s == 0:
        clamps.append("n_s==0")
    if l_raw <= 0:
        clamps.append("l>=0")
    l = max(l_raw, 0.0)
    terms = {k: float(v) for k, v in terms.items()}
    terms["n_cor"] = float(n_cor)
    terms["P_cor"] = float(P_cor)
    terms["l_unfloored"] = l_raw
    return KeyRateResult(l=l, rate=l / N, N=int(N), protocol="npp", params=dict(params or {}),
                         terms=terms, budget=budget, clamps_hit=clamps, observation=obs)
