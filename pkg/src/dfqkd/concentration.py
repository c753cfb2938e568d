"""Multiplicative Chernoff bounds with failure probability given as ``t = ln(1/eps)``.

Lower-case ``cher_*`` bound an observation from its expectation; capitalised
``Cher_*`` bound an unknown expectation from an observation.  All four accept
scalars or broadcastable arrays.

Lower bounds are clamped at zero. Upper bounds are not clamped: the caller
knows the population size, this module does not.
"""
from __future__ import annotations

import numpy as np

from .numerics import DomainError

__all__ = ["cher_upper", "cher_lower", "Cher_upper", "Cher_lower"]


def _prep(value, t):
    v = np.asarray(value, dtype=float)
    tt = np.asarray(float(t) if not isinstance(t, np.ndarray) else t, dtype=float)
    if np.any(~(v >= 0)):
        raise DomainError("Chernoff count argument must be >= 0")
    if np.any(~(tt >= 0)):
        raise DomainError("Chernoff t = ln(1/eps) must be >= 0")
    return v, tt


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def _root(t, cv):
    """sqrt(t**2 + cv*t), factored so neither square can overflow or underflow."""
    return np.sqrt(t) * np.sqrt(t + cv)


def cher_upper(E, t):
    """Upper bound on an observation with expectation ``E``, exceeded w.p. <= eps."""
    E, t = _prep(E, t)
    return _out(E + 0.5 * t + 0.5 * _root(t, 8.0 * E))


def cher_lower(E, t):
    """Lower bound on an observation with expectation ``E``, undercut w.p. <= eps."""
    E, t = _prep(E, t)
    s = np.sqrt(2.0 * E) * np.sqrt(t)
    den = E + s
    with np.errstate(invalid="ignore", divide="ignore"):
        # E - sqrt(2Et) rationalised; avoids cancellation when E >> t.
        val = np.where(den > 0, (E - 2.0 * t) / np.where(den > 0, den, 1.0) * E, 0.0)
    return _out(np.maximum(val, 0.0))


def Cher_upper(X, t):
    """Upper bound on the expectation behind observation ``X``."""
    X, t = _prep(X, t)
    return _out(X + t + _root(t, 2.0 * X))


def Cher_lower(X, t):
    """Lower bound on the expectation behind observation ``X``."""
    X, t = _prep(X, t)
    den = X + 0.5 * t + 0.5 * _root(t, 8.0 * X)
    with np.errstate(invalid="ignore", divide="ignore"):
        # X + t/2 - sqrt(t^2 + 8Xt)/2 == X(X - t) / den
        val = np.where(den > 0, (X - t) / np.where(den > 0, den, 1.0) * X, 0.0)
    return _out(np.maximum(val, 0.0))
