"""Failure-budget allocation and key-rate result containers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .definetti import NPP_DIMS, SCS_DIMS, Mode, ln_penalty
from .numerics import LN2, LogEps

SCS_K_USES = 3
NPP_K_USES = 4

SCS_DEFAULT_SPLIT = (0.25, 0.25, 0.125, 0.25)  # eps_bar, eps_cor, eps_prime, 2*sqrt(k eps0 g)
NPP_DEFAULT_SPLIT = (1 / 3, 1 / 3, 1 / 3)  # eps_bar, eps_cor, 2*sqrt(k eps0 g)


@dataclass(frozen=True)
class EpsilonBudget:
    """How ``eps_tot`` is split between smoothing, correctness and estimation.

    Every entry is a ``t = ln(1/eps)`` value. ``t_prime`` is ``None`` for
    protocols without a chain-rule smoothing term. In asymptotic mode every
    ``t`` is zero and the key-length constants are dropped.

    Fields may hold numpy arrays when the split itself is being searched.
    """

    t_bar: Any
    t_cor: Any
    t_prime: Any
    t0: Any
    ln_g: float
    k_uses: int
    x: int
    mode: str = "exact"
    asymptotic: bool = False
    t_tot: float = 0.0

    @classmethod
    def scs(cls, eps_tot: LogEps, N: int, mode: Mode = "exact",
            split=SCS_DEFAULT_SPLIT) -> "EpsilonBudget":
        f_bar, f_cor, f_prime, f_pe = (np.asarray(v, dtype=float) for v in split)
        t = float(eps_tot)
        lng = ln_penalty(N, SCS_DIMS.x, mode)
        return cls(
            t_bar=_sq(t - np.log(f_bar)),
            t_cor=_sq(t - np.log(f_cor)),
            t_prime=_sq(t - np.log(f_prime)),
            t0=_sq(2.0 * (t + np.log(2.0 / f_pe)) + math.log(SCS_K_USES) + lng),
            ln_g=lng, k_uses=SCS_K_USES, x=SCS_DIMS.x, mode=mode, t_tot=t,
        )

    @classmethod
    def npp(cls, eps_tot: LogEps, N: int, mode: Mode = "exact",
            split=NPP_DEFAULT_SPLIT) -> "EpsilonBudget":
        f_bar, f_cor, f_pe = (np.asarray(v, dtype=float) for v in split)
        t = float(eps_tot)
        lng = ln_penalty(N, NPP_DIMS.x, mode)
        return cls(
            t_bar=_sq(t - np.log(f_bar)),
            t_cor=_sq(t - np.log(f_cor)),
            t_prime=None,
            t0=_sq(2.0 * (t + np.log(2.0 / f_pe)) + math.log(NPP_K_USES) + lng),
            ln_g=lng, k_uses=NPP_K_USES, x=NPP_DIMS.x, mode=mode, t_tot=t,
        )

    @classmethod
    def asymptotic_limit(cls, protocol: str) -> "EpsilonBudget":
        if protocol == "scs":
            return cls(0.0, 0.0, 0.0, 0.0, 0.0, SCS_K_USES, SCS_DIMS.x, "none", True)
        return cls(0.0, 0.0, None, 0.0, 0.0, NPP_K_USES, NPP_DIMS.x, "none", True)

    def ln_eps_total(self):
        """``ln`` of the composed security parameter, via log-sum-exp."""
        terms = [
            -np.asarray(self.t_bar, dtype=float),
            -np.asarray(self.t_cor, dtype=float),
            LN2 + 0.5 * (math.log(self.k_uses) + self.ln_g - np.asarray(self.t0, dtype=float)),
        ]
        if self.t_prime is not None:
            terms.append(LN2 - np.asarray(self.t_prime, dtype=float))
        stacked = np.stack(np.broadcast_arrays(*terms))
        hi = stacked.max(axis=0)
        return _sq(hi + np.log(np.exp(stacked - hi).sum(axis=0)))

    def log2_constants(self) -> dict:
        """Additive key-length penalties in bits (all zero in asymptotic mode)."""
        if self.asymptotic:
            out = {"ec_verify": 0.0, "pa_smoothing": 0.0}
            if self.t_prime is not None:
                out["chain_rule"] = 0.0
            return out
        out = {
            "ec_verify": _sq(1.0 + np.asarray(self.t_cor) / LN2),
            "pa_smoothing": _sq(2.0 * (np.asarray(self.t_bar) / LN2 - 1.0)),
        }
        if self.t_prime is not None:
            out["chain_rule"] = _sq(1.0 + 2.0 * np.asarray(self.t_prime) / LN2)
        return out

    def as_row(self) -> dict:
        """Linear-domain eps values except eps0 and g, which stay logarithmic."""
        def lin(t):
            return None if t is None else math.exp(-float(t))
        return {
            "eps_bar": lin(self.t_bar),
            "eps_cor": lin(self.t_cor),
            "eps_prime": lin(self.t_prime),
            "ln_inv_eps0": float(self.t0),
            "ln_g": self.ln_g,
        }


@dataclass
class KeyRateResult:
    """Outcome of one key-length evaluation.

    ``terms`` names every subtractive contribution (in bits) plus the
    intermediate estimates; ``clamps_hit`` lists every clamp that fired.
    """

    l: float
    rate: float
    N: int
    protocol: str
    params: dict = field(default_factory=dict)
    terms: dict = field(default_factory=dict)
    budget: EpsilonBudget | None = None
    clamps_hit: list = field(default_factory=list)
    observation: Any = None
    L: float | None = None

    @property
    def zero_key(self) -> bool:
        return self.l <= 0.0

    @property
    def mode(self) -> str:
        return "asymptotic" if self.budget is not None and self.budget.asymptotic else "finite"


def _sq(x):
    return float(x) if np.ndim(x) == 0 else x
