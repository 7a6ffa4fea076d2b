"""Effective rate of the four transmission strategies.

For a block service process ``R`` (bits per block of ``m`` channel uses) the
effective rate in bits per channel use is ``-ln E{exp(-theta R)} / (m theta)``.
With ARQ a failed block serves zero bits, so conditioning on the fading gain
gives the per-strategy kernels evaluated below. ``theta = 0`` is handled by
the closed-form limits (average served rate) instead of the 0/0 expression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Union

import numpy as np

from . import fbl
from .channel import ChannelParams, Deterministic, QosSpec, fading_expectation, gain_quantile
from .exceptions import BracketError, DomainError, SolverError
from .numerics import DEFAULT_QUADRATURE, QuadratureSpec, bisect_root, exponential_rule


def _check_eps(eps: float) -> None:
    if not (0.0 < eps <= 1.0):
        raise DomainError(f"eps must lie in (0, 1], got {eps!r}")


@dataclass(frozen=True)
class VariableRate:
    """Rate follows the fading at a fixed block error probability ``eps``."""

    eps: float

    def __post_init__(self):
        _check_eps(self.eps)


@dataclass(frozen=True)
class FixedRate:
    """Constant rate ``r_f``; the block error probability varies with fading."""

    r_f: float

    def __post_init__(self):
        if not (self.r_f > 0 and math.isfinite(self.r_f)):
            raise DomainError(f"r_f must be positive and finite, got {self.r_f!r}")


@dataclass(frozen=True)
class PowerAdapted:
    """Variable rate with the QoS-driven power policy ``mu*``."""

    eps: float

    def __post_init__(self):
        _check_eps(self.eps)


@dataclass(frozen=True)
class ParallelPair:
    """Two independent length-``m`` codewords per block."""

    eps: float

    def __post_init__(self):
        _check_eps(self.eps)


StrategyModel = Union[VariableRate, FixedRate, PowerAdapted, ParallelPair]
STRATEGY_KINDS = {
    "variable": VariableRate,
    "fixed": FixedRate,
    "power": PowerAdapted,
    "parallel": ParallelPair,
}


@dataclass(frozen=True)
class PowerPolicy:
    """Fading cutoff ``alpha`` and exponent ``beta = theta m / ln 2``."""

    alpha: float
    beta: float
    iterations: int = 0


@dataclass(frozen=True)
class EffectiveRateResult:
    rate: float
    strategy: StrategyModel
    theta: float
    diagnostics: dict = field(default_factory=dict, compare=False)


# ---------------------------------------------------------------------------
# Power policy
# ---------------------------------------------------------------------------

def power_policy_mu(z, policy: PowerPolicy):
    """Normalised transmit power at gain ``z``; zero below the cutoff.

    ``1/(alpha^{1/(b+1)} z^{b/(b+1)}) - 1/z`` is evaluated as
    ``expm1(ln(z/alpha)/(b+1)) / z`` to stay accurate for large ``b``.
    """
    z = np.asarray(z, dtype=float)
    above = z >= policy.alpha
    zs = np.where(above, z, policy.alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = np.expm1(np.log(zs / policy.alpha) / (policy.beta + 1.0)) / zs
    mu = np.where(above, mu, 0.0)
    return float(mu) if mu.ndim == 0 else mu


def mean_power_policy(policy: PowerPolicy, params: ChannelParams,
                      spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """``E{mu*(z)}`` under the channel's fading model."""
    return fading_expectation(params.fading, lambda z: power_policy_mu(z, policy), spec,
                              breakpoints=[policy.alpha])


@lru_cache(maxsize=1024)
def _solve_alpha(params: ChannelParams, theta: float, spec: QuadratureSpec) -> PowerPolicy:
    beta = theta * params.m / math.log(2.0)

    def excess(log_alpha: float) -> float:
        pol = PowerPolicy(math.exp(log_alpha), beta)
        return mean_power_policy(pol, params, spec) - params.snr

    t_hi = math.log(gain_quantile(params.fading, 1.0 - 1e-12)) if not (
        isinstance(params.fading, Deterministic) and params.fading.z == 0) else None
    if t_hi is None:
        raise BracketError("power policy undefined for zero deterministic gain")
    if excess(t_hi) > 0:
        raise BracketError("mean power stays above snr at the largest cutoff")
    step, t_lo = 1.0, t_hi - 1.0
    while excess(t_lo) < 0:
        step *= 2.0
        t_lo = t_hi - step
        if t_lo < -700.0:
            raise BracketError(
                f"cutoff below exp(-700) needed (snr={params.snr}, beta={beta:.4g}); "
                "mean power cannot reach snr")
    t, _, iters = bisect_root(excess, t_lo, t_hi, tol=1e-13, full_output=True)
    policy = PowerPolicy(math.exp(t), beta, iters)
    residual = abs(mean_power_policy(policy, params, spec) - params.snr)
    if residual > 1e-8 * params.snr:
        raise SolverError(f"power constraint residual {residual:.3g} exceeds 1e-8*snr "
                          f"(alpha={policy.alpha:.6g}, beta={beta:.6g})")
    return policy


def solve_alpha(params: ChannelParams, qos: QosSpec,
                spec: QuadratureSpec = DEFAULT_QUADRATURE) -> PowerPolicy:
    """Cutoff ``alpha`` meeting the average power constraint ``E{mu*} = snr`` with equality.

    The mean power decreases monotonically in ``alpha``, so the root is
    bracketed in ``ln(alpha)`` (cutoffs reach ~1e-24 for strict QoS) and
    bisected.
    """
    return _solve_alpha(params, float(qos.theta), spec)


# ---------------------------------------------------------------------------
# Effective rate
# ---------------------------------------------------------------------------

def _nodes_used(params: ChannelParams, spec: QuadratureSpec, breakpoints) -> int | None:
    if isinstance(params.fading, Deterministic):
        return 1
    if spec.scheme == "adaptive-trapezoid":
        return None
    s = params.fading.mean_power
    return len(exponential_rule(spec, [b / s for b in breakpoints])[0])


def _fixed_rate_breakpoint(r_f: float, params: ChannelParams) -> float:
    # gain at which log2(1 + snr z) = r_f
    return math.expm1(r_f * math.log(2.0)) / params.snr


def _block_kernel(strategy: StrategyModel, params: ChannelParams, theta: float,
                  policy: PowerPolicy | None):
    """Return ``(f, breakpoints)`` with ``f(z) = E{exp(-theta R) | z}``."""
    tm = theta * params.m
    if isinstance(strategy, VariableRate):
        eps = strategy.eps
        return (lambda z: eps + (1 - eps) * np.exp(-tm * fbl.coding_rate(z, params, eps))), ()
    if isinstance(strategy, ParallelPair):
        eps = strategy.eps
        return (lambda z: np.square(eps + (1 - eps) * np.exp(
            -tm * fbl.coding_rate_parallel(z, params, eps)))), ()
    if isinstance(strategy, PowerAdapted):
        eps = strategy.eps

        def f(z):
            mu = power_policy_mu(z, policy)
            return eps + (1 - eps) * np.exp(-tm * fbl.coding_rate_power_adapted(z, mu, params, eps))
        return f, (policy.alpha,)
    if isinstance(strategy, FixedRate):
        r_f = strategy.r_f
        served = math.exp(-tm * r_f)

        def f(z):
            e = fbl.error_prob_fixed_rate(z, params, r_f)
            return e + (1 - e) * served
        return f, (_fixed_rate_breakpoint(r_f, params),)
    raise DomainError(f"unknown strategy {strategy!r}")


def _mean_rate_integrand(strategy: StrategyModel, params: ChannelParams, policy):
    """Return ``(f, breakpoints)`` with ``E{f}`` the average served rate per channel use."""
    if isinstance(strategy, VariableRate):
        eps = strategy.eps
        return (lambda z: (1 - eps) * fbl.coding_rate(z, params, eps)), ()
    if isinstance(strategy, ParallelPair):
        eps = strategy.eps
        return (lambda z: (1 - eps) * 2.0 * fbl.coding_rate_parallel(z, params, eps)), ()
    if isinstance(strategy, PowerAdapted):
        eps = strategy.eps
        return (lambda z: (1 - eps) * fbl.coding_rate_power_adapted(
            z, power_policy_mu(z, policy), params, eps)), (policy.alpha,)
    if isinstance(strategy, FixedRate):
        r_f = strategy.r_f
        return (lambda z: (1 - fbl.error_prob_fixed_rate(z, params, r_f)) * r_f), (
            _fixed_rate_breakpoint(r_f, params),)
    raise DomainError(f"unknown strategy {strategy!r}")


def _always_fails(strategy: StrategyModel) -> bool:
    return getattr(strategy, "eps", None) == 1.0


def kernel_mean(strategy: StrategyModel, params: ChannelParams, qos: QosSpec,
                spec: QuadratureSpec = DEFAULT_QUADRATURE, policy: PowerPolicy | None = None) -> float:
    """``E{exp(-theta R)}`` for one block: ``Psi`` (or ``Psi_p`` for the parallel pair)."""
    if not qos.theta > 0:
        raise DomainError("kernel_mean needs theta > 0")
    if _always_fails(strategy):
        return 1.0
    if isinstance(strategy, PowerAdapted) and policy is None:
        policy = solve_alpha(params, qos, spec)
    f, bps = _block_kernel(strategy, params, qos.theta, policy)
    return fading_expectation(params.fading, f, spec, bps)


def psi(eps: float, params: ChannelParams, qos: QosSpec,
        spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """``E{eps + (1 - eps) exp(-theta m r)}``, strictly convex in ``eps``."""
    return kernel_mean(VariableRate(eps), params, qos, spec)


def psi_parallel(eps: float, params: ChannelParams, qos: QosSpec,
                 spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    return kernel_mean(ParallelPair(eps), params, qos, spec)


def effective_rate_zero_theta(strategy: StrategyModel, params: ChannelParams,
                              spec: QuadratureSpec = DEFAULT_QUADRATURE,
                              policy: PowerPolicy | None = None) -> EffectiveRateResult:
    """Average served rate per channel use (the ``theta -> 0`` limit)."""
    diag = {"nodes": None, "solver_iterations": 0}
    if _always_fails(strategy):
        return EffectiveRateResult(0.0, strategy, 0.0, diag)
    if isinstance(strategy, PowerAdapted) and policy is None:
        policy = solve_alpha(params, QosSpec(0.0), spec)
    if policy is not None:
        diag["solver_iterations"] = policy.iterations
    f, bps = _mean_rate_integrand(strategy, params, policy)
    rate = fading_expectation(params.fading, f, spec, bps)
    diag["nodes"] = _nodes_used(params, spec, bps)
    return EffectiveRateResult(rate, strategy, 0.0, diag)


def effective_rate(strategy: StrategyModel, params: ChannelParams, qos: QosSpec,
                   spec: QuadratureSpec = DEFAULT_QUADRATURE,
                   policy: PowerPolicy | None = None) -> EffectiveRateResult:
    """Effective rate (bits per channel use) of ``strategy`` at QoS exponent ``qos.theta``."""
    if qos.theta == 0:
        return effective_rate_zero_theta(strategy, params, spec, policy)
    diag = {"nodes": None, "solver_iterations": 0}
    if _always_fails(strategy):
        return EffectiveRateResult(0.0, strategy, qos.theta, diag)
    if isinstance(strategy, PowerAdapted) and policy is None:
        policy = solve_alpha(params, qos, spec)
    if policy is not None:
        diag["solver_iterations"] = policy.iterations
    f, bps = _block_kernel(strategy, params, qos.theta, policy)
    k = fading_expectation(params.fading, f, spec, bps)
    diag["nodes"] = _nodes_used(params, spec, bps)
    rate = -math.log(k) / (params.m * qos.theta)
    return EffectiveRateResult(rate, strategy, qos.theta, diag)


def ideal_effective_rate(params: ChannelParams, qos: QosSpec,
                         spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Effective rate when every block is served error-free at capacity ``log2(1 + snr z)``."""
    if qos.theta == 0:
        return fading_expectation(params.fading, lambda z: np.log1p(params.snr * z) * fbl.LOG2E, spec)
    beta = qos.theta * params.m / math.log(2.0)
    k = fading_expectation(params.fading, lambda z: np.exp(-beta * np.log1p(params.snr * z)), spec)
    return -math.log(k) / (params.m * qos.theta)


def outage_probability(r_f: float, params: ChannelParams) -> float:
    """``P(log2(1 + snr z) < r_f)``."""
    if not r_f > 0:
        raise DomainError(f"r_f must be positive, got {r_f!r}")
    z_star = _fixed_rate_breakpoint(r_f, params)
    fading = params.fading
    if isinstance(fading, Deterministic):
        return 1.0 if fading.z < z_star else 0.0
    return -math.expm1(-z_star / fading.mean_power)


def with_param(strategy: StrategyModel, value: float) -> StrategyModel:
    """Same strategy kind with its free parameter (``eps`` or ``r_f``) replaced."""
    if isinstance(strategy, FixedRate):
        return replace(strategy, r_f=value)
    return replace(strategy, eps=value)
