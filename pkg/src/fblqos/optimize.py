"""Optimal error probability, optimal fixed rate, crossovers and sweeps."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Union

import numpy as np

from . import fbl
from .channel import ChannelParams, Deterministic, QosSpec, db_to_linear, gain_quantile
from .effective import (
    STRATEGY_KINDS,
    EffectiveRateResult,
    FixedRate,
    ParallelPair,
    PowerAdapted,
    StrategyModel,
    VariableRate,
    effective_rate,
    effective_rate_zero_theta,
    kernel_mean,
    solve_alpha,
    with_param,
)
from .exceptions import BracketError, DomainError, SolverError
from .numerics import DEFAULT_QUADRATURE, QuadratureSpec, bisect_root, golden_minimize

EPS_LO = 1e-6
EPS_HI = 1.0 - 1e-6


@dataclass(frozen=True)
class OptimizationResult:
    arg: float
    value: float
    iterations: int
    bracket: tuple[float, float]
    strategy: StrategyModel
    theta: float


def _resolve_kind(kind) -> type:
    if isinstance(kind, str):
        try:
            return STRATEGY_KINDS[kind]
        except KeyError:
            raise DomainError(f"unknown strategy kind {kind!r}") from None
    return kind


def optimal_eps(kind, params: ChannelParams, qos: QosSpec,
                spec: QuadratureSpec = DEFAULT_QUADRATURE, tol: float = 1e-8) -> OptimizationResult:
    """Block error probability maximising the effective rate.

    For ``theta > 0`` this minimises the strictly convex kernel mean
    (``Psi`` / ``Psi_p``); at ``theta = 0`` it maximises the strictly concave
    average rate. Both are unimodal, so golden-section search is exact up
    to ``tol``.
    """
    cls = _resolve_kind(kind)
    if cls not in (VariableRate, PowerAdapted, ParallelPair):
        raise DomainError(f"optimal_eps does not apply to {cls.__name__}")
    policy = solve_alpha(params, qos, spec) if cls is PowerAdapted else None
    if qos.theta > 0:
        def objective(e):
            return kernel_mean(cls(e), params, qos, spec, policy)
    else:
        def objective(e):
            return -effective_rate_zero_theta(cls(e), params, spec, policy).rate
    arg, _, iters = golden_minimize(objective, EPS_LO, EPS_HI, tol=tol, full_output=True)
    best = cls(arg)
    value = effective_rate(best, params, qos, spec, policy).rate
    return OptimizationResult(arg, value, iters, (EPS_LO, EPS_HI), best, qos.theta)


def fixed_rate_upper_bound(params: ChannelParams) -> float:
    """Search limit for ``r_f``: capacity at the 99.99th gain percentile.

    For deterministic fading the limit is the capacity plus eight
    dispersion widths, beyond which the block error is essentially one.
    """
    g = params.snr * gain_quantile(params.fading, 0.9999)
    cap = math.log2(1.0 + g)
    if isinstance(params.fading, Deterministic):
        spread = math.sqrt(g * (2 + g) / (1 + g) ** 2 / params.m) * fbl.LOG2E
        return cap + 8.0 * spread
    return cap


def optimal_fixed_rate(params: ChannelParams, qos: QosSpec,
                       spec: QuadratureSpec = DEFAULT_QUADRATURE, grid_points: int = 64,
                       tol: float = 1e-9) -> OptimizationResult:
    """Fixed transmission rate maximising the effective rate.

    Unimodality in ``r_f`` is observed numerically but not proven, so a
    coarse grid locates the peak, golden search refines it within the
    neighbouring cells, and the better of the two points is returned.
    """
    r_hi = fixed_rate_upper_bound(params)
    if r_hi <= 0:
        raise DomainError("channel supports no positive rate")
    if qos.theta > 0:
        def objective(r):
            return kernel_mean(FixedRate(r), params, qos, spec)
    else:
        def objective(r):
            return -effective_rate_zero_theta(FixedRate(r), params, spec).rate
    grid = np.linspace(r_hi / grid_points, r_hi, grid_points)
    vals = [objective(r) for r in grid]
    i = int(np.argmin(vals))
    lo = grid[i - 1] if i > 0 else r_hi * 1e-9
    hi = grid[i + 1] if i + 1 < grid_points else r_hi
    arg, fmin, iters = golden_minimize(objective, lo, hi, tol=tol * r_hi, full_output=True)
    if vals[i] < fmin:
        arg = float(grid[i])
    best = FixedRate(arg)
    value = effective_rate(best, params, qos, spec).rate
    return OptimizationResult(arg, value, iters + grid_points, (float(lo), float(hi)), best, qos.theta)


def crossover_theta(curve_a: Callable[[float], float], curve_b: Callable[[float], float],
                    lo: float, hi: float, tol: float = 1e-4) -> float | None:
    """QoS exponent where ``curve_a - curve_b`` changes sign on ``[lo, hi]``.

    Returns ``None`` when there is no strict sign change in the window.
    """
    def diff(t):
        return curve_a(t) - curve_b(t)

    d_lo, d_hi = diff(lo), diff(hi)
    if not d_lo * d_hi < 0:
        return None
    try:
        return bisect_root(diff, lo, hi, tol=tol)
    except BracketError:
        return None


def optimal_rate_curve(kind, params: ChannelParams, spec: QuadratureSpec = DEFAULT_QUADRATURE):
    """``theta -> optimal effective rate`` for one strategy kind."""
    cls = _resolve_kind(kind)

    def curve(theta: float) -> float:
        qos = QosSpec(theta)
        if cls is FixedRate:
            return optimal_fixed_rate(params, qos, spec).value
        return optimal_eps(cls, params, qos, spec).value
    return curve


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

AXES = ("theta", "m", "snr", "snr_db", "eps", "r_f")


@dataclass(frozen=True)
class SweepSpec:
    """One-parameter sweep.

    ``strategy`` is either a strategy instance (evaluate it at every grid
    point) or a strategy class (optimise its free parameter at every grid
    point). On the ``eps`` / ``r_f`` axes the grid value is the strategy
    parameter itself.
    """

    axis: str
    grid: tuple[float, ...]
    params: ChannelParams
    qos: QosSpec
    strategy: Union[StrategyModel, type]
    quadrature: QuadratureSpec = DEFAULT_QUADRATURE

    def __post_init__(self):
        if self.axis not in AXES:
            raise DomainError(f"unknown sweep axis {self.axis!r}; choose from {AXES}")
        grid = tuple(float(g) for g in self.grid)
        if not grid:
            raise DomainError("sweep grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise DomainError("sweep grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)


@dataclass(frozen=True)
class SweepRow:
    value: float
    result: Union[OptimizationResult, EffectiveRateResult, None]
    error: str | None = None


def _evaluate_row(spec: SweepSpec, value: float) -> SweepRow:
    params, qos, strategy = spec.params, spec.qos, spec.strategy
    try:
        if spec.axis == "theta":
            qos = QosSpec(value)
        elif spec.axis == "m":
            params = replace(params, blocklength_m=int(round(value)))
        elif spec.axis == "snr":
            params = replace(params, snr=value)
        elif spec.axis == "snr_db":
            params = replace(params, snr=db_to_linear(value))
        else:
            cls = strategy if isinstance(strategy, type) else type(strategy)
            if (spec.axis == "r_f") != (cls is FixedRate):
                raise DomainError(f"axis {spec.axis!r} does not match strategy {cls.__name__}")
            strategy = cls(value) if isinstance(strategy, type) else with_param(strategy, value)
        if isinstance(strategy, type):
            if strategy is FixedRate:
                result = optimal_fixed_rate(params, qos, spec.quadrature)
            else:
                result = optimal_eps(strategy, params, qos, spec.quadrature)
        else:
            result = effective_rate(strategy, params, qos, spec.quadrature)
        return SweepRow(value, result)
    except (DomainError, BracketError, SolverError, FloatingPointError, ValueError) as exc:
        return SweepRow(value, None, f"{type(exc).__name__}: {exc}")


def sweep(spec: SweepSpec, workers: int = 1) -> list[SweepRow]:
    """Evaluate every grid point; rows are independent and returned in grid order."""
    if workers > 1 and len(spec.grid) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_evaluate_row, [spec] * len(spec.grid), spec.grid))
    return [_evaluate_row(spec, v) for v in spec.grid]
