"""Finite-key analysis of side-channel-secure (SCS) QKD.

Pipeline: imperfect-source vacuum projections are mapped to effective
intensities, the untagged state is decomposed onto the vacuum, the
double-coherent state and a residual, and the phase-error probability is
bounded from the observed vacuum-vacuum (``O``) and coherent-coherent
(``B``) click rates.  Three Chernoff estimates give ``n_ph`` under
collective attacks; the budget's ``t0`` already carries the de Finetti
penalty that makes the estimate valid against coherent attacks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .concentration import Cher_upper, cher_upper
from .numerics import DomainError, h2
from .results import EpsilonBudget, KeyRateResult

if TYPE_CHECKING:
    from .channel import GlobalParams


@dataclass(frozen=True)
class ScsSourceSpec:
    """Lower bounds on vacuum projections of the four prepared states.

    ``a0``/``b0`` refer to the weak coherent states and may be left ``None``,
    in which case the ideal value ``exp(-mu)`` for the chosen intensity is used.
    """

    a_v0: float = 1.0
    b_v0: float = 1.0
    a0: float | None = None
    b0: float | None = None

    def __post_init__(self):
        for name in ("a_v0", "b_v0", "a0", "b0"):
            v = getattr(self, name)
            if v is not None and not 0.5 <= v <= 1.0:
                raise DomainError(f"{name} must lie in [0.5, 1], got {v!r}")

    def intensities(self, mu):
        mu = np.asarray(mu, dtype=float)
        a0 = np.exp(-mu) if self.a0 is None else self.a0
        b0 = np.exp(-mu) if self.b0 is None else self.b0
        return effective_intensity(a0, self.a_v0), effective_intensity(b0, self.b_v0)


PERFECT_SOURCE = ScsSourceSpec()


@dataclass(frozen=True)
class ScsObservation:
    n_O: float
    n_B: float
    n_Z: float

    @property
    def n_t(self):
        return self.n_O + self.n_B + self.n_Z

    @property
    def e_bit(self):
        n_t = np.asarray(self.n_t, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            e = np.where(n_t > 0, (np.asarray(self.n_B) + self.n_O) / np.where(n_t > 0, n_t, 1), 0.0)
        return float(e) if e.ndim == 0 else e


@dataclass(frozen=True)
class ScsCoefficients:
    mu_A: float
    mu_B: float
    c0: float
    c1: float
    c_bar2: float


def effective_intensity(a0, a_v0):
    """Intensity of the perfect coherent state an imperfect source maps onto."""
    a0 = np.asarray(a0, dtype=float)
    a_v0 = np.asarray(a_v0, dtype=float)
    if np.any((a0 < 0.5) | (a0 > 1) | (a_v0 < 0.5) | (a_v0 > 1)):
        raise DomainError("vacuum projections must lie in [0.5, 1]")
    overlap = np.sqrt(a0 * a_v0) - np.sqrt((1 - a0) * (1 - a_v0))
    if np.any(overlap <= 0):
        raise DomainError("states are orthogonal: effective intensity is infinite")
    mu = -2.0 * np.log(overlap)
    # -0.0 from log(1)
    mu = np.abs(mu)
    return float(mu) if mu.ndim == 0 else mu


def coefficients(mu_A, mu_B, c0_override=None) -> ScsCoefficients:
    """Decomposition coefficients of the untagged state.

    Defaults to ``c0 = exp(-(mu_A + mu_B) / 4)``; ``c1 = 1/c0`` always.
    """
    mu_A = np.asarray(mu_A, dtype=float)
    mu_B = np.asarray(mu_B, dtype=float)
    if np.any(mu_A < 0) or np.any(mu_B < 0):
        raise DomainError("intensities must be >= 0")
    if c0_override is None:
        s = 0.25 * (mu_A + mu_B)
        c0 = np.exp(-s)
        # c0 + 1/c0 - 2 == 4 sinh^2(s/2)
        excess = 4.0 * np.sinh(0.5 * s) ** 2
    else:
        c0 = np.asarray(c0_override, dtype=float)
        if np.any(c0 <= 0):
            raise DomainError("c0 must be > 0")
        excess = (c0 - 1.0) ** 2 / c0
    # c0 + c1 - 2 exp(-mu/2) == excess - 2 expm1(-mu/2)
    fa = excess - 2.0 * np.expm1(-0.5 * mu_A)
    fb = excess - 2.0 * np.expm1(-0.5 * mu_B)
    c_bar2 = np.sqrt(np.maximum(fa * fb, 0.0))
    c1 = 1.0 / c0
    sq = (lambda v: float(v) if np.ndim(v) == 0 else v)
    return ScsCoefficients(sq(mu_A), sq(mu_B), sq(c0), sq(c1), sq(c_bar2))


def _phase_error_prob_raw(P_O, P_B, p, c: ScsCoefficients):
    P_O = np.asarray(P_O, dtype=float)
    P_B = np.asarray(P_B, dtype=float)
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    so = np.sqrt(P_O) / q
    sb = np.sqrt(P_B) / p
    c0, c1, c2 = c.c0, c.c1, c.c_bar2
    # (c0 so + c1 sb)^2 + c2^2 + c2 (c0 so + c1 sb), expanded term by term
    inner = (c0**2 * so**2 + c1**2 * sb**2 + c2**2
             + 2 * c0 * c1 * so * sb + c0 * c2 * so + c1 * c2 * sb)
    return 0.5 * p * q * inner


def phase_error_prob_bound(P_O, P_B, p, c: ScsCoefficients):
    """Upper bound on the per-round phase-error probability, clamped to 1."""
    for v in (P_O, P_B):
        if np.any(np.asarray(v) < 0) or np.any(np.asarray(v) > 1):
            raise DomainError("click probabilities must lie in [0, 1]")
    if np.any(~((np.asarray(p) > 0) & (np.asarray(p) < 1))):
        raise DomainError("p must lie in (0, 1)")
    out = np.minimum(_phase_error_prob_raw(P_O, P_B, p, c), 1.0)
    return float(out) if out.ndim == 0 else out


def estimate_phase_errors(obs: ScsObservation, N: int, p, c: ScsCoefficients, t0):
    """Coherent-attack upper bound on phase errors among untagged clicks.

    ``t0`` must already include the de Finetti penalty for three uses. The
    result never exceeds ``n_Z``.
    """
    return _estimate_phase_errors(obs, N, p, c, t0)[0]


def _estimate_phase_errors(obs, N, p, c, t0):
    N = float(N)
    clamps = []
    P_O = np.minimum(np.asarray(Cher_upper(obs.n_O, t0)) / N, 1.0)
    P_B = np.minimum(np.asarray(Cher_upper(obs.n_B, t0)) / N, 1.0)
    raw = _phase_error_prob_raw(P_O, P_B, p, c)
    if np.any(raw > 1):
        clamps.append("P_ph<=1")
    P_ph = np.minimum(raw, 1.0)
    n_ph = np.asarray(cher_upper(N * P_ph, t0))
    n_Z = np.asarray(obs.n_Z, dtype=float)
    if np.any(n_ph > n_Z):
        clamps.append("n_ph<=n_Z")
    n_ph = np.minimum(n_ph, n_Z)
    return (float(n_ph) if n_ph.ndim == 0 else n_ph), clamps


def scs_key_terms(obs: ScsObservation, n_ph_bar, f: float, budget: EpsilonBudget):
    """Unfloored key length and its named subtractive terms (array friendly)."""
    n_Z = np.asarray(obs.n_Z, dtype=float)
    n_t = np.asarray(obs.n_t, dtype=float)
    clamps = []
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(n_Z > 0, np.asarray(n_ph_bar) / np.where(n_Z > 0, n_Z, 1), 0.5)
    if np.any(ratio > 0.5):
        clamps.append("phase_error_rate<=1/2")
    ratio = np.clip(ratio, 0.0, 0.5)
    terms = {
        "phase_error": n_Z * h2(ratio),
        "ec_leak": f * n_t * h2(obs.e_bit),
    }
    terms.update(budget.log2_constants())
    l_raw = n_Z - sum(terms.values())
    return l_raw, terms, clamps


def scs_key_length(obs: ScsObservation, n_ph_bar: float, g: "GlobalParams",
                   budget: EpsilonBudget, params: dict | None = None) -> KeyRateResult:
    """Secure key length, floored at zero, with a per-term breakdown."""
    f, N = g.f, g.N
    if n_ph_bar > obs.n_Z * (1 + 1e-12):
        raise DomainError("n_ph_bar must not exceed n_Z")
    l_raw, terms, clamps = scs_key_terms(obs, n_ph_bar, f, budget)
    l_raw = float(l_raw)
    if l_raw <= 0:
        clamps.append("l>=0")
    l = max(l_raw, 0.0)
    terms = {k: float(v) for k, v in terms.items()}
    terms["n_ph_bar"] = float(n_ph_bar)
    terms["l_unfloored"] = l_raw
    return KeyRateResult(l=l, rate=l / N, N=int(N), protocol="scs", params=dict(params or {}),
                         terms=terms, budget=budget, clamps_hit=clamps, observation=obs)


def ln_c0_default(mu_A: float, mu_B: float) -> float:
    return -0.25 * (mu_A + mu_B)


def golden_section_max(fun, lo: float, hi: float, tol: float = 1e-6, max_iter: int = 100):
    """Maximise a unimodal ``fun`` on ``[lo, hi]``; returns ``(x, fun(x))``."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * (1.0 + abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fun(d)
    return (c, fc) if fc >= fd else (d, fd)
