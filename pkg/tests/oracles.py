"""Independent high-precision reference implementations used by the tests.

Nothing here imports the package under test. Formulas are written in their
plain textbook form and evaluated in mpmath at 50 significant digits, so the
rationalised / cancellation-free double-precision code paths are checked
against a route that shares no numerics with them.
"""
from __future__ import annotations

import mpmath as mp

mp.mp.dps = 50


# --- Chernoff bounds, t = ln(1/eps) ---------------------------------------

def cher_upper(E, t):
    E, t = mp.mpf(E), mp.mpf(t)
    return E + t / 2 + mp.sqrt(t**2 + 8 * E * t) / 2


def cher_lower(E, t):
    E, t = mp.mpf(E), mp.mpf(t)
    return max(mp.mpf(0), E - mp.sqrt(2 * E * t))


def Cher_upper(X, t):
    X, t = mp.mpf(X), mp.mpf(t)
    return X + t + mp.sqrt(t**2 + 2 * X * t)


def Cher_lower(X, t):
    X, t = mp.mpf(X), mp.mpf(t)
    return max(mp.mpf(0), X + t / 2 - mp.sqrt(t**2 + 8 * X * t) / 2)


# --- log-gamma by the Stirling series ------------------------------------

def stirling_lngamma(z, terms=12, shift=30):
    """ln Gamma(z) from the asymptotic series after shifting z above ``shift``."""
    z = mp.mpf(z)
    acc = mp.mpf(0)
    while z < shift:
        acc -= mp.log(z)
        z += 1
    s = (z - mp.mpf(1) / 2) * mp.log(z) - z + mp.log(2 * mp.pi) / 2
    for k in range(1, terms + 1):
        s += mp.bernoulli(2 * k) / (2 * k * (2 * k - 1) * z ** (2 * k - 1))
    return s + acc


def ln_binom_stirling(N, x):
    """ln C(N + x - 1, N)."""
    return (stirling_lngamma(N + x) - stirling_lngamma(N + 1) - stirling_lngamma(x))


def ln_binom_mpmath(N, x):
    return mp.log(mp.binomial(N + x - 1, N))


# --- honest channel and the SCS key-length chain -------------------------

def h2(x):
    x = mp.mpf(x)
    if x == 0 or x == 1:
        return mp.mpf(0)
    return -x * mp.log(x, 2) - (1 - x) * mp.log(1 - x, 2)


def _exclusive_right(I_left_raw, I_right_raw, e_d, p_d):
    I_l = (1 - e_d) * I_left_raw + e_d * I_right_raw
    I_r = (1 - e_d) * I_right_raw + e_d * I_left_raw
    # right detector fires, left stays silent
    return (1 - (1 - p_d) * mp.exp(-I_r)) * (1 - p_d) * mp.exp(-I_l)


def scs_counts(L, N, mu, p, p_d=1e-9, e_d=0.04, eta_d=0.30, alpha_f=0.2):
    p_d, e_d, eta_d, alpha_f = (mp.mpf(v) for v in (p_d, e_d, eta_d, alpha_f))
    mu, p, N = mp.mpf(mu), mp.mpf(p), mp.mpf(N)
    eta = eta_d * mp.power(10, -alpha_f * (mp.mpf(L) / 2) / 10)
    a = eta * mu
    r_O = _exclusive_right(0, 0, e_d, p_d)
    r_Z = _exclusive_right(a / 2, a / 2, e_d, p_d)
    # equal-phase coherent pulses: all light leaves by the left port
    r_B = _exclusive_right((mp.sqrt(a) + mp.sqrt(a)) ** 2 / 2,
                           (mp.sqrt(a) - mp.sqrt(a)) ** 2 / 2, e_d, p_d)
    return {
        "n_O": N * (1 - p) ** 2 * r_O,
        "n_B": N * p**2 * r_B,
        "n_Z": N * 2 * p * (1 - p) * r_Z,
    }


def scs_key_length(L, N, mu, p, eps_tot=mp.mpf("1e-10"), f=1.1, x=64, **channel):
    """Unfloored SCS key length for a perfect source and the default budget."""
    eps_tot = mp.mpf(eps_tot)
    counts = scs_counts(L, N, mu, p, **channel)
    n_O, n_B, n_Z = counts["n_O"], counts["n_B"], counts["n_Z"]
    n_t = n_O + n_B + n_Z
    N, mu, p = mp.mpf(N), mp.mpf(mu), mp.mpf(p)

    eps_bar = eps_tot / 4
    eps_cor = eps_tot / 4
    eps_prime = eps_tot / 8
    g = mp.binomial(N + x - 1, N)
    # 2 sqrt(3 eps0 g) = eps_tot / 4
    eps0 = (eps_tot / 8) ** 2 / (3 * g)
    t0 = -mp.log(eps0)

    mu_A = mu_B = mu  # a0 = exp(-mu), vacuum states exact
    c0 = mp.exp(-(mu_A + mu_B) / 4)
    c1 = 1 / c0
    c2 = mp.sqrt((c0 + c1 - 2 * mp.exp(-mu_A / 2)) * (c0 + c1 - 2 * mp.exp(-mu_B / 2)))

    P_O = Cher_upper(n_O, t0) / N
    P_B = Cher_upper(n_B, t0) / N
    P_ph = p * (1 - p) / 2 * (
        c0**2 * P_O / (1 - p) ** 2 + c1**2 * P_B / p**2 + c2**2
        + 2 * c0 * c1 * mp.sqrt(P_O * P_B / ((1 - p) ** 2 * p**2))
        + c0 * c2 * mp.sqrt(P_O / (1 - p) ** 2) + c1 * c2 * mp.sqrt(P_B / p**2))
    n_ph = min(cher_upper(N * P_ph, t0), n_Z)
    e_bit = (n_B + n_O) / n_t
    return (n_Z - n_Z * h2(n_ph / n_Z) - f * n_t * h2(e_bit)
            - mp.log(2 / eps_prime**2, 2) - mp.log(2 / eps_cor, 2)
            - 2 * mp.log(1 / (2 * eps_bar), 2))
