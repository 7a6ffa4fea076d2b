"""Per-block coding rates and error probabilities (normal approximation).

A complex block of ``m`` channel uses is coded as a real Gaussian channel of
blocklength ``2m``. All rates are in bits per channel use and every function
is vectorised over the power gain ``z``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams
from .exceptions import DomainError
from .numerics import gaussian_q, gaussian_q_inv

LOG2E = float(np.log2(np.e))


@dataclass(frozen=True)
class ServiceOutcome:
    """Bits served in one block of ``m`` channel uses."""

    bits_delivered: float
    success: bool


def _capacity(gamma):
    return np.log1p(gamma) * LOG2E


def _dispersion(gamma):
    # 1 - 1/(1+g)^2 without cancellation at small g
    return gamma * (2.0 + gamma) / np.square(1.0 + gamma)


def _as_output(x):
    return float(x) if np.ndim(x) == 0 else x


def _check_gain(z):
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or np.any(np.isnan(z)):
        raise DomainError("power gain z must be >= 0")
    return z


def _finish(rate, params: ChannelParams):
    if params.clamp_nonnegative:
        rate = np.maximum(rate, 0.0)
    return _as_output(rate)


def normal_approx_rate(gamma, m: int, eps: float):
    """``log2(1+g) - sqrt((1 - 1/(1+g)^2)/m) Q^{-1}(eps) log2(e)`` at received SNR ``g``."""
    qinv = gaussian_q_inv(eps)
    gamma = np.asarray(gamma, dtype=float)
    return _capacity(gamma) - np.sqrt(_dispersion(gamma) / m) * qinv * LOG2E


def coding_rate(z, params: ChannelParams, eps: float):
    """Achievable rate in a block with power gain ``z`` at block error ``eps``."""
    z = _check_gain(z)
    return _finish(normal_approx_rate(params.snr * z, params.m, eps), params)


def coding_rate_parallel(z, params: ChannelParams, eps: float):
    """Rate of each of two independent length-``m`` codewords (real and
    imaginary parts sent separately)."""
    z = _check_gain(z)
    qinv = gaussian_q_inv(eps)
    g = params.snr * z
    rate = 0.5 * _capacity(g) - np.sqrt(_dispersion(g) / (2.0 * params.m)) * qinv * LOG2E
    return _finish(rate, params)


def coding_rate_power_adapted(z, mu, params: ChannelParams, eps: float):
    """:func:`coding_rate` with the received SNR ``snr*z`` replaced by ``mu*z``."""
    z = _check_gain(z)
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0):
        raise DomainError("power allocation mu must be >= 0")
    return _finish(normal_approx_rate(mu * z, params.m, eps), params)


def error_prob_fixed_rate(z, params: ChannelParams, r_f: float):
    """Block error probability when sending at the fixed rate ``r_f``.

    At ``z = 0`` the dispersion vanishes and the limit value 1 is returned.
    """
    if not r_f > 0:
        raise DomainError(f"r_f must be positive, got {r_f!r}")
    z = _check_gain(z)
    g = params.snr * z
    spread = np.sqrt(_dispersion(g) / params.m) * LOG2E
    margin = _capacity(g) - r_f
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.where(spread > 0, margin / np.where(spread > 0, spread, 1.0), -np.inf)
    return _as_output(gaussian_q(arg))
