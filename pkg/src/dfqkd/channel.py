"""Honest-channel model: expected click counts and a seeded Monte-Carlo sampler.

Charlie sits at the midpoint. Each arm is a lossy fiber followed by a
threshold detector with efficiency ``eta_d``; the two pulses meet on a
balanced beamsplitter, misalignment leaks a fraction ``e_d`` of each port's
intensity into the other, and dark counts are independent per detector.

All count functions broadcast over numpy arrays of ``mu``, ``p`` etc. so the
optimizer can scan whole parameter grids in one call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .npp import NppObservation
from .numerics import DomainError, LogEps
from .scs import ScsObservation

Phase = Literal["zero", "pi", "incoherent"]


class DegenerateChannelError(ValueError):
    """The channel produces no clicks at all."""


@dataclass(frozen=True)
class GlobalParams:
    """Hardware and run configuration shared by both protocols."""

    p_d: float = 1e-9
    e_d: float = 0.04
    eta_d: float = 0.30
    f: float = 1.1
    alpha_f: float = 0.2
    eps_tot: LogEps = field(default_factory=lambda: LogEps.from_eps(1e-10))
    N: int = 10**12
    L: float = 0.0

    def __post_init__(self):
        for name in ("p_d", "e_d", "eta_d"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {v!r}")
        if not self.f >= 1.0:
            raise DomainError(f"f must be >= 1, got {self.f!r}")
        if not self.alpha_f >= 0.0:
            raise DomainError(f"alpha_f must be >= 0, got {self.alpha_f!r}")
        if int(self.N) < 1 or int(self.N) != self.N:
            raise DomainError(f"N must be a positive integer, got {self.N!r}")
        if not self.L >= 0.0:
            raise DomainError(f"L must be >= 0, got {self.L!r}")
        if not isinstance(self.eps_tot, LogEps):
            object.__setattr__(self, "eps_tot", LogEps(float(self.eps_tot)))
        object.__setattr__(self, "N", int(self.N))

    def with_(self, **changes) -> "GlobalParams":
        return replace(self, **changes)


#: Reference hardware: 1e-9 dark counts, 4% misalignment, 30% detectors, 0.2 dB/km.
TABLE1 = GlobalParams()


def side_transmittance(g: GlobalParams) -> float:
    """Source-to-click transmittance of one arm (half the total distance)."""
    return g.eta_d * 10.0 ** (-g.alpha_f * (g.L / 2.0) / 10.0)


def port_intensities(alpha_sq, beta_sq, rel_phase: Phase, e_d: float):
    """Mean photon numbers reaching the (left, right) detectors."""
    a = np.asarray(alpha_sq, dtype=float)
    b = np.asarray(beta_sq, dtype=float)
    if rel_phase == "incoherent":
        left_raw = right_raw = 0.5 * (a + b)
    else:
        bright = 0.5 * (np.sqrt(a) + np.sqrt(b)) ** 2
        dark = 0.5 * (np.sqrt(a) - np.sqrt(b)) ** 2
        if rel_phase == "zero":
            left_raw, right_raw = bright, dark
        elif rel_phase == "pi":
            left_raw, right_raw = dark, bright
        else:
            raise ValueError(f"unknown relative phase {rel_phase!r}")
    left = (1.0 - e_d) * left_raw + e_d * right_raw
    right = (1.0 - e_d) * right_raw + e_d * left_raw
    return left, right


def interfere(alpha_sq, beta_sq, rel_phase: Phase, e_d: float, p_d: float):
    """Exclusive-click probabilities ``(P_left_only, P_right_only)``.

    ``alpha_sq`` and ``beta_sq`` are the intensities arriving at Charlie,
    already attenuated by the arm transmittance.
    """
    left, right = port_intensities(alpha_sq, beta_sq, rel_phase, e_d)
    # ln P(no click) per detector; expm1 keeps 1 - P(no click) exact near p_d
    with np.errstate(divide="ignore"):
        ln_dark = np.log1p(-p_d)
    ln_quiet_l = ln_dark - left
    ln_quiet_r = ln_dark - right
    p_left = -np.expm1(ln_quiet_l) * np.exp(ln_quiet_r)
    p_right = -np.expm1(ln_quiet_r) * np.exp(ln_quiet_l)
    if np.ndim(p_left) == 0:
        return float(p_left), float(p_right)
    return p_left, p_right


def _scs_click_probs(g: GlobalParams, mu):
    eta = side_transmittance(g)
    mu = np.asarray(mu, dtype=float)
    zeros = np.zeros_like(mu)
    _, r_o = interfere(zeros, zeros, "incoherent", g.e_d, g.p_d)
    _, r_z = interfere(eta * mu, zeros, "incoherent", g.e_d, g.p_d)
    _, r_b = interfere(eta * mu, eta * mu, "zero", g.e_d, g.p_d)
    return np.asarray(r_o), np.asarray(r_b), np.asarray(r_z)


def scs_expected_counts(g: GlobalParams, mu, p) -> ScsObservation:
    """Expected (real-valued) SCS click counts over ``g.N`` rounds."""
    mu = np.asarray(mu, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0) & (p < 1))) or np.any(~(mu > 0)):
        raise DomainError("SCS counts need 0 < p < 1 and mu > 0")
    r_o, r_b, r_z = _scs_click_probs(g, mu)
    N = float(g.N)
    obs = ScsObservation(
        n_O=_squeeze(N * (1 - p) ** 2 * r_o),
        n_B=_squeeze(N * p**2 * r_b),
        n_Z=_squeeze(N * 2 * p * (1 - p) * r_z),
    )
    if np.any(np.asarray(obs.n_t) == 0):
        raise DegenerateChannelError("SCS channel yields zero clicks")
    return obs


def _npp_click_probs(g: GlobalParams, mu, nu):
    eta = side_transmittance(g)
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    zeros = np.zeros(np.broadcast(mu, nu).shape)
    s00 = np.add(*interfere(zeros, zeros, "incoherent", g.e_d, g.p_d))
    s0nu = np.add(*interfere(zeros, eta * nu + zeros, "incoherent", g.e_d, g.p_d))
    l0, r0 = interfere(eta * mu, eta * mu, "zero", g.e_d, g.p_d)
    lpi, rpi = interfere(eta * mu, eta * mu, "pi", g.e_d, g.p_d)
    return s00, s0nu, (l0, r0), (lpi, rpi)


def npp_expected_counts(g: GlobalParams, mu, nu, p, p0) -> NppObservation:
    """Expected NPP click counts; a click is an exclusive click of either port."""
    mu, nu, p, p0 = (np.asarray(v, dtype=float) for v in (mu, nu, p, p0))
    if (np.any(~((p > 0) & (p < 1))) or np.any(~((p0 >= 0) & (p0 <= 1)))
            or np.any(~(nu > 0)) or np.any(~(mu > 0))):
        raise DomainError("NPP counts need 0 < p < 1, 0 <= p0 <= 1, mu > 0, nu > 0")
    s00, s0nu, (l0, r0), (lpi, rpi) = _npp_click_probs(g, mu, nu)
    N = float(g.N)
    decoy = N * (1 - p) ** 2
    succ = l0 + r0 + lpi + rpi
    n_s = N * p**2 * 0.5 * succ
    if np.any(n_s == 0):
        raise DegenerateChannelError("NPP channel yields zero sifted clicks")
    return NppObservation(
        n_00=_squeeze(decoy * p0**2 * s00),
        n_0nu=_squeeze(decoy * p0 * (1 - p0) * s0nu),
        n_nu0=_squeeze(decoy * p0 * (1 - p0) * s0nu),
        n_s=_squeeze(n_s),
        e_bit=_squeeze((r0 + lpi) / succ),
    )


def single_photon_click_rate(g: GlobalParams) -> float:
    """Exclusive-click probability when one arm holds one photon, the other vacuum."""
    eta = side_transmittance(g)
    return eta * (1 - g.p_d) + (1 - eta) * 2 * g.p_d * (1 - g.p_d)


def mc_sample(g: GlobalParams, protocol: str, params: dict, rounds: int, seed: int,
              shards: int = 1):
    """Sample integer click counts for ``rounds`` protocol rounds.

    Every round independently draws the senders' choices and the detector
    outcome from the same per-round probabilities as the expected-count
    model. The per-cell totals of that process are multinomial, which is how
    they are drawn here. ``shards`` splits the rounds over independent child
    seeds spawned from ``seed``; counts from the shards add.
    """
    rounds = int(rounds)
    if rounds < 0:
        raise DomainError("rounds must be >= 0")
    if protocol == "scs":
        cells = _scs_cells(g, params)
    elif protocol == "npp":
        cells = _npp_cells(g, params)
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    names = list(cells)
    probs = np.array([cells[k] for k in names], dtype=float)
    rest = max(0.0, 1.0 - math.fsum(probs))
    pvals = np.append(probs, rest)
    pvals /= pvals.sum()

    children = np.random.SeedSequence(seed).spawn(shards)
    base, extra = divmod(rounds, shards)
    total = np.zeros(len(pvals), dtype=np.int64)
    for i, child in enumerate(children):
        n_i = base + (1 if i < extra else 0)
        total += np.random.default_rng(child).multinomial(n_i, pvals)
    counts = dict(zip(names, (int(c) for c in total[:-1])))

    if protocol == "scs":
        return ScsObservation(n_O=counts["O"], n_B=counts["B"], n_Z=counts["Z"])
    n_s = counts["ss_ok"] + counts["ss_err"]
    return NppObservation(
        n_00=counts["00"], n_0nu=counts["0nu"], n_nu0=counts["nu0"],
        n_s=n_s, e_bit=counts["ss_err"] / n_s if n_s else 0.0,
    )


def _scs_cells(g, params):
    mu, p = float(params["mu"]), float(params["p"])
    r_o, r_b, r_z = (float(v) for v in _scs_click_probs(g, mu))
    return {"O": (1 - p) ** 2 * r_o, "B": p**2 * r_b, "Z": 2 * p * (1 - p) * r_z}


def _npp_cells(g, params):
    mu, nu = float(params["mu"]), float(params["nu"])
    p, p0 = float(params["p"]), float(params["p0"])
    s00, s0nu, (l0, r0), (lpi, rpi) = _npp_click_probs(g, mu, nu)
    decoy = (1 - p) ** 2
    half_ss = 0.5 * p**2
    return {
        "00": decoy * p0**2 * float(s00),
        "0nu": decoy * p0 * (1 - p0) * float(s0nu),
        "nu0": decoy * p0 * (1 - p0) * float(s0nu),
        "ss_ok": half_ss * (float(l0) + float(rpi)),
        "ss_err": half_ss * (float(r0) + float(lpi)),
    }


def _squeeze(x):
    return float(x) if np.ndim(x) == 0 else x
