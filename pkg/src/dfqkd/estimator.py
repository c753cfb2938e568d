"""scikit-learn style wrappers around the key-rate optimizer.

The estimators are stateless in the learning sense: ``fit`` only validates
hyper-parameters and freezes the derived configuration. ``predict`` maps rows
of ``[L_km, N]`` to optimised key rates, so a model can be cloned, grid
searched over hardware parameters with ``set_params``, or dropped into a
pipeline next to other numeric transforms.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .channel import GlobalParams
from .numerics import LogEps
from .optimizer import PARAM_NAMES, SearchSpace, optimize
from .scs import ScsSourceSpec


class _KeyRateBase(BaseEstimator):
    _protocol = ""

    def _global_params(self) -> GlobalParams:
        return GlobalParams(p_d=self.p_d, e_d=self.e_d, eta_d=self.eta_d, f=self.f,
                            alpha_f=self.alpha_f, eps_tot=LogEps.from_eps(self.eps_tot))

    def _space(self) -> SearchSpace:
        space = SearchSpace.default(self._protocol, grid_points=self.grid_points,
                                    max_refine=self.max_refine, tune_budget=self.tune_budget)
        if self.bounds:
            space = SearchSpace({**space.bounds, **self.bounds}, grid_points=self.grid_points,
                                max_refine=self.max_refine, tune_budget=self.tune_budget)
        return space

    def fit(self, X=None, y=None):
        """Validate hyper-parameters. ``X`` and ``y`` are ignored."""
        if self.g_mode not in ("exact", "paper-bound"):
            raise ValueError(f"g_mode must be 'exact' or 'paper-bound', got {self.g_mode!r}")
        self.global_params_ = self._global_params()
        self.search_space_ = self._space()
        self.search_space_.validate(self._protocol)
        self.n_features_in_ = 2
        return self

    def _rows(self, X):
        check_is_fitted(self, "global_params_")
        X = check_array(X, ensure_2d=True, dtype=float)
        if X.shape[1] != 2:
            raise ValueError(f"expected 2 columns [L_km, N], got {X.shape[1]}")
        if np.any(X[:, 0] < 0) or np.any(X[:, 1] < 1):
            raise ValueError("distances must be >= 0 and N >= 1")
        return X

    def evaluate(self, X):
        """Full :class:`~dfqkd.results.KeyRateResult` for each ``[L_km, N]`` row."""
        X = self._rows(X)
        out = []
        for L, N in X:
            g = self.global_params_.with_(L=float(L), N=int(round(N)))
            out.append(optimize(self._protocol, g, self.search_space_, self.g_mode,
                                self.asymptotic, **self._extra()))
        return out

    def predict(self, X):
        """Optimised secret-key rate per pulse for each ``[L_km, N]`` row."""
        return np.array([r.rate for r in self.evaluate(X)])

    def optimal_params(self, X):
        """Optimal protocol parameters per row, shape ``(n_rows, n_params)``."""
        names = PARAM_NAMES[self._protocol]
        return np.array([[r.params[n] for n in names] for r in self.evaluate(X)])

    def _extra(self):
        return {}


class ScsKeyRate(_KeyRateBase):
    """Side-channel-secure QKD key rate, optimised over ``(mu, p)``."""

    _protocol = "scs"

    def __init__(self, p_d=1e-9, e_d=0.04, eta_d=0.30, f=1.1, alpha_f=0.2, eps_tot=1e-10,
                 g_mode="exact", asymptotic=False, grid_points=16, max_refine=200,
                 tune_budget=False, bounds=None, a_v0=1.0, b_v0=1.0):
        self.p_d = p_d
        self.e_d = e_d
        self.eta_d = eta_d
        self.f = f
        self.alpha_f = alpha_f
        self.eps_tot = eps_tot
        self.g_mode = g_mode
        self.asymptotic = asymptotic
        self.grid_points = grid_points
        self.max_refine = max_refine
        self.tune_budget = tune_budget
        self.bounds = bounds
        self.a_v0 = a_v0
        self.b_v0 = b_v0

    def fit(self, X=None, y=None):
        super().fit(X, y)
        self.source_ = ScsSourceSpec(a_v0=self.a_v0, b_v0=self.b_v0)
        return self

    def _extra(self):
        return {"source": self.source_}


class NppKeyRate(_KeyRateBase):
    """No-phase-postselection twin-field QKD key rate, optimised over ``(mu, nu, p, p0)``."""

    _protocol = "npp"

    def __init__(self, p_d=1e-9, e_d=0.04, eta_d=0.30, f=1.1, alpha_f=0.2, eps_tot=1e-10,
                 g_mode="exact", asymptotic=False, grid_points=16, max_refine=200,
                 tune_budget=False, bounds=None):
        self.p_d = p_d
        self.e_d = e_d
        self.eta_d = eta_d
        self.f = f
        self.alpha_f = alpha_f
        self.eps_tot = eps_tot
        self.g_mode = g_mode
        self.asymptotic = asymptotic
        self.grid_points = grid_points
        self.max_refine = max_refine
        self.tune_budget = tune_budget
        self.bounds = bounds
