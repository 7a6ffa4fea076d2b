"""Independent reference implementations used to pin expected values.

Everything here is built from scipy primitives (norm, quad, special
functions, brentq) and shares no code with the package under test.
"""

import math

import numpy as np
from scipy import integrate, optimize, special, stats

LOG2E = 1.0 / math.log(2.0)


def q_inv(p):
    return stats.norm.isf(p)


def rate(z, snr, m, eps, half=False):
    g = snr * z
    if half:
        return 0.5 * math.log2(1 + g) - math.sqrt((1 - 1 / (1 + g) ** 2) / (2 * m)) * q_inv(eps) * LOG2E
    return math.log2(1 + g) - math.sqrt((1 - 1 / (1 + g) ** 2) / m) * q_inv(eps) * LOG2E


def fixed_rate_error(z, snr, m, r_f):
    g = snr * z
    if g == 0:
        return 1.0
    disp = math.sqrt((1 - 1 / (1 + g) ** 2) / m) * LOG2E
    return stats.norm.sf((math.log2(1 + g) - r_f) / disp)


def rayleigh_mean(f, breaks=()):
    """E{f(z)}, z ~ Exp(1), by adaptive quad after the substitution z = u^2."""
    pts = sorted(math.sqrt(b) for b in breaks if b > 0)
    edges = [0.0] + [p for p in pts if p < 12.0] + [12.0]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(lambda u: 2 * u * math.exp(-u * u) * f(u * u), a, b,
                                epsabs=0, epsrel=1e-13, limit=400)
        total += val
    return total


def psi(eps, snr, m, theta):
    return rayleigh_mean(lambda z: eps + (1 - eps) * math.exp(-theta * m * rate(z, snr, m, eps)))


def variable_rate(eps, snr, m, theta):
    if theta == 0:
        return (1 - eps) * rayleigh_mean(lambda z: rate(z, snr, m, eps))
    return -math.log(psi(eps, snr, m, theta)) / (m * theta)


def fixed_rate_zero_theta(r_f, snr, m):
    z_star = (2.0 ** r_f - 1) / snr
    return (1 - rayleigh_mean(lambda z: fixed_rate_error(z, snr, m, r_f), (z_star,))) * r_f


def mean_mu_closed_form(alpha, beta):
    """E{mu*} for unit-mean Rayleigh via the upper incomplete gamma function."""
    s = 1.0 / (beta + 1.0)
    upper = special.gammaincc(s, alpha) * special.gamma(s)
    return alpha ** (-s) * upper - special.exp1(alpha)


def alpha_closed_form(snr, m, theta):
    beta = theta * m / math.log(2.0)
    return math.exp(optimize.brentq(lambda la: mean_mu_closed_form(math.exp(la), beta) - snr,
                                    -60.0, 5.0, xtol=1e-15, rtol=1e-15))


def two_point_theta(a, eps, c):
    """theta solving a = -(1/theta) ln(eps + (1-eps) e^{-theta c})."""
    def g(t):
        return -math.log(eps + (1 - eps) * math.exp(-t * c)) / t - a
    return optimize.brentq(g, 1e-9, 50.0 / c * 100, xtol=1e-14)


def lindley_loop(increments, q0=0.0):
    out = []
    q = q0
    for x in increments:
        q = max(q + x, 0.0)
        out.append(q)
    return np.array(out)
