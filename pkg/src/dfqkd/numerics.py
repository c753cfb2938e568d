"""Scalar numeric kernel: binary entropy, log-gamma and log-domain failure probabilities.

Failure probabilities in this package routinely reach ``1e-100000`` once the
de Finetti penalty is applied, so they are never held in linear domain.  A
probability ``eps`` is carried as ``t = ln(1/eps)`` instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LN2 = math.log(2.0)

_H2_CLAMP = 1e-15


class DomainError(ValueError):
    """Argument outside the mathematical domain of a function."""


@dataclass(frozen=True, order=True)
class LogEps:
    """A failure probability ``eps`` stored as ``t = ln(1/eps) >= 0``."""

    t: float

    def __post_init__(self):
        if not (self.t >= 0.0) or math.isnan(self.t):
            raise DomainError(f"LogEps requires t >= 0, got {self.t!r}")

    @classmethod
    def from_eps(cls, eps: float) -> "LogEps":
        if not 0.0 < eps <= 1.0:
            raise DomainError(f"failure probability must lie in (0, 1], got {eps!r}")
        return cls(-math.log(eps))

    @classmethod
    def from_log10(cls, log10_eps: float) -> "LogEps":
        """Build from ``log10(eps)``, e.g. ``-10`` for ``1e-10``."""
        return cls(-log10_eps * math.log(10.0))

    def scaled(self, k: float) -> "LogEps":
        """The probability ``k * eps`` for ``k >= 1``."""
        if k < 1:
            raise DomainError(f"scale factor must be >= 1, got {k!r}")
        t = self.t - math.log(k)
        if t < 0:
            raise DomainError(f"k*eps exceeds 1 (t={self.t}, ln k={math.log(k)})")
        return LogEps(t)

    @property
    def ln_eps(self) -> float:
        return -self.t

    @property
    def log2_inv(self) -> float:
        """``log2(1/eps)``."""
        return self.t / LN2

    def __float__(self) -> float:
        return float(self.t)


def h2(x):
    """Binary Shannon entropy in bits.

    Accepts scalars or arrays. Values within 1e-15 of 0 or 1 are snapped to the
    endpoint, where the entropy is 0.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < -_H2_CLAMP) or np.any(arr > 1.0 + _H2_CLAMP):
        raise DomainError(f"h2 argument must lie in [0, 1], got {x!r}")
    arr = np.where(arr < _H2_CLAMP, 0.0, np.where(arr > 1.0 - _H2_CLAMP, 1.0, arr))
    inner = (arr > 0.0) & (arr < 1.0)
    safe = np.where(inner, arr, 0.5)
    out = np.where(inner, -safe * np.log2(safe) - (1.0 - safe) * np.log2(1.0 - safe), 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def ln_gamma(z: float) -> float:
    """Natural log of the gamma function for ``z > 0``."""
    if not z > 0:
        raise DomainError(f"ln_gamma requires z > 0, got {z!r}")
    return math.lgamma(z)
