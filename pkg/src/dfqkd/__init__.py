"""Finite-key rates for side-channel-secure and no-phase-postselection TF QKD."""
from .channel import TABLE1, GlobalParams, mc_sample, npp_expected_counts, scs_expected_counts
from .concentration import Cher_lower, Cher_upper, cher_lower, cher_upper
from .definetti import DimensionSpec, lift_budget, ln_g, ln_g_bound
from .estimator import NppKeyRate, ScsKeyRate
from .numerics import DomainError, LogEps, h2
from .optimizer import SearchSpace, evaluate, optimize, sweep
from .results import EpsilonBudget, KeyRateResult
from .scs import ScsSourceSpec

__all__ = [
    "TABLE1", "GlobalParams", "mc_sample", "npp_expected_counts", "scs_expected_counts",
    "Cher_lower", "Cher_upper", "cher_lower", "cher_upper",
    "DimensionSpec", "lift_budget", "ln_g", "ln_g_bound",
    "NppKeyRate", "ScsKeyRate", "DomainError", "LogEps", "h2",
    "SearchSpace", "evaluate", "optimize", "sweep",
    "EpsilonBudget", "KeyRateResult", "ScsSourceSpec",
]
