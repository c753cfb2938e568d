"""de Finetti penalty for lifting collective-attack estimates to coherent attacks.

A parameter-estimation step that fails with probability ``eps0`` under any
collective attack fails with probability at most ``g(N, x) * eps0`` under a
coherent attack, where ``g(N, x) = binom(N + x - 1, N)`` and ``x`` is the
squared total dimension of the systems involved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .numerics import DomainError, LogEps, ln_gamma

Mode = Literal["exact", "paper-bound"]

# Above this many product terms, fall back to the log-gamma difference.
_MAX_PRODUCT_TERMS = 2_000_000


class BudgetError(ValueError):
    """Requested coherent-attack failure budget cannot be met."""


@dataclass(frozen=True)
class DimensionSpec:
    d_A: int
    d_B: int
    d_C: int

    def __post_init__(self):
        for name in ("d_A", "d_B", "d_C"):
            if int(getattr(self, name)) < 1:
                raise DomainError(f"{name} must be >= 1")

    @property
    def x(self) -> int:
        return (self.d_A * self.d_B * self.d_C) ** 2


#: Two-level ancillas for Alice and Bob, binary click flag for Charlie.
SCS_DIMS = DimensionSpec(2, 2, 2)
#: Six-level ancillas per user, three-outcome Charlie (left/right/none); 108**2.
NPP_DIMS = DimensionSpec(6, 6, 3)


def ln_g(N: int, x: int) -> float:
    """``ln binom(N + x - 1, N)``.

    Evaluated as ``sum_{k=1}^{m} log1p(M / k)`` with ``m = min(N, x-1)`` and
    ``M = max(N, x-1)``. A plain log-gamma difference would lose about six
    digits to cancellation at ``N ~ 1e12``.
    """
    N, x = int(N), int(x)
    if N < 1 or x < 2:
        raise DomainError(f"ln_g requires N >= 1 and x >= 2, got N={N}, x={x}")
    m, M = min(N, x - 1), max(N, x - 1)
    if m > _MAX_PRODUCT_TERMS:
        return ln_gamma(N + x) - ln_gamma(N + 1) - ln_gamma(x)
    k = np.arange(1, m + 1, dtype=float)
    return math.fsum(np.log1p(M / k))


def ln_g_bound(N: int, x: int) -> float:
    """Log of the closed-form upper bound ``(e (N+x-1) / (x-1))**(x-1)``."""
    if x < 2:
        raise DomainError(f"ln_g_bound requires x >= 2, got {x}")
    return (x - 1) * (1.0 + math.log1p(N / (x - 1)))


def ln_penalty(N: int, x: int, mode: Mode = "exact") -> float:
    if mode == "exact":
        return ln_g(N, x)
    if mode == "paper-bound":
        return ln_g_bound(N, x)
    raise ValueError(f"unknown penalty mode {mode!r}")


def lift_budget(t_target, k_uses: int, N: int, dims: DimensionSpec | int,
                mode: Mode = "exact") -> LogEps:
    """Per-use collective-attack ``t0`` such that ``k_uses * eps0 * g = eps_target``.

    ``dims`` may be a :class:`DimensionSpec` or the squared dimension ``x``.
    """
    if k_uses < 1:
        raise DomainError("k_uses must be >= 1")
    x = dims.x if isinstance(dims, DimensionSpec) else int(dims)
    t0 = float(t_target) + ln_penalty(N, x, mode) + math.log(k_uses)
    if t0 < 0:
        raise BudgetError(f"target failure budget unachievable (t0={t0})")
    return LogEps(t0)
