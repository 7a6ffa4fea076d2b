"""Discrete-time buffer simulation driven by per-block ARQ service.

A constant ``a`` bits arrive per block and the block serves ``R_t`` bits
(zero on a decoding error), so the backlog follows the Lindley recursion
``Q_{t+1} = max(Q_t + a - R_t, 0)``. When ``a`` equals ``m`` times the
effective rate at ``theta``, ``P(Q >= q)`` decays like ``exp(-theta q)``;
:func:`estimate_decay_exponent` measures that slope from the simulated tail.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import fbl
from .channel import ChannelParams, QosSpec, make_rng, sample_gain
from .effective import (
    FixedRate,
    ParallelPair,
    PowerAdapted,
    PowerPolicy,
    StrategyModel,
    VariableRate,
    effective_rate_zero_theta,
    power_policy_mu,
    solve_alpha,
)
from .exceptions import DomainError, EstimationError, InstabilityError
from .fbl import ServiceOutcome
from .numerics import DEFAULT_QUADRATURE, QuadratureSpec

log = logging.getLogger(__name__)

MIN_BLOCKS = 100_000
_CHUNK = 1 << 20
_GRID_POINTS = 401


@dataclass(frozen=True)
class SimConfig:
    strategy: StrategyModel
    params: ChannelParams
    arrival_bits_per_block: float
    num_blocks: int = 1_000_000
    warmup_blocks: int = 10_000
    seed: int = 0
    replicas: int = 1
    q_grid: tuple[float, ...] | None = None
    # the QoS exponent that fixes the power policy of PowerAdapted
    policy_theta: float = 0.0

    def __post_init__(self):
        if not (self.arrival_bits_per_block >= 0 and math.isfinite(self.arrival_bits_per_block)):
            raise DomainError("arrival_bits_per_block must be finite and >= 0")
        if self.num_blocks < MIN_BLOCKS:
            raise DomainError(f"num_blocks must be >= {MIN_BLOCKS}, got {self.num_blocks}")
        if not 0 <= self.warmup_blocks < self.num_blocks:
            raise DomainError("warmup_blocks must satisfy 0 <= warmup < num_blocks")
        if self.replicas < 1:
            raise DomainError("replicas must be >= 1")


@dataclass
class QueueTrace:
    """Tail histogram and summary statistics of the simulated backlog (in bits)."""

    q_grid: np.ndarray
    tail_counts: np.ndarray
    total_blocks: int
    mean_queue: float
    drained_fraction: float
    max_queue: float
    stable: bool = True
    theta_hat: float | None = None
    theta_stderr: float | None = None
    fit_window: tuple[float, float] | None = None
    note: str = ""
    replica_means: list = field(default_factory=list)

    def tail_probability(self) -> np.ndarray:
        return self.tail_counts / self.total_blocks

    def to_csv(self, fh=None) -> str:
        """Write ``q_bits, count, P_Q_ge_q`` rows; returns the text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["q_bits", "count_Q_ge_q", "P_Q_ge_q"])
        for q, c, p in zip(self.q_grid, self.tail_counts, self.tail_probability()):
            w.writerow([repr(float(q)), int(c), repr(float(p))])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def mean_service_bits(strategy: StrategyModel, params: ChannelParams,
                      spec: QuadratureSpec = DEFAULT_QUADRATURE, policy: PowerPolicy | None = None) -> float:
    """Average bits served per block (the stability threshold for the arrival)."""
    return params.m * effective_rate_zero_theta(strategy, params, spec, policy).rate


def _draw_services(strategy: StrategyModel, params: ChannelParams, z: np.ndarray,
                   rng: np.random.Generator, policy: PowerPolicy | None):
    """Bits served per block and whether anything was decoded."""
    z = np.asarray(z, dtype=float)
    m = params.m
    if isinstance(strategy, FixedRate):
        ok = rng.random(z.shape) >= fbl.error_prob_fixed_rate(z, params, strategy.r_f)
        return np.where(ok, m * strategy.r_f, 0.0), ok
    if not isinstance(strategy, (VariableRate, PowerAdapted, ParallelPair)):
        raise DomainError(f"unknown strategy {strategy!r}")
    if isinstance(strategy, PowerAdapted) and policy is None:
        raise DomainError("PowerAdapted service needs a power policy")
    eps = strategy.eps
    if isinstance(strategy, ParallelPair):
        decoded = (rng.random(z.shape) >= eps).astype(float)
        decoded += rng.random(z.shape) >= eps
        if eps == 1.0:
            return np.zeros(z.shape), decoded > 0
        bits = decoded * m * fbl.coding_rate_parallel(z, params, eps)
        return np.maximum(bits, 0.0), decoded > 0
    ok = rng.random(z.shape) >= eps
    if eps == 1.0:
        return np.zeros(z.shape), ok
    if isinstance(strategy, PowerAdapted):
        rate = fbl.coding_rate_power_adapted(z, power_policy_mu(z, policy), params, eps)
    else:
        rate = fbl.coding_rate(z, params, eps)
    return np.where(ok, np.maximum(m * rate, 0.0), 0.0), ok


def sample_services(strategy: StrategyModel, params: ChannelParams, z: np.ndarray,
                    rng: np.random.Generator, policy: PowerPolicy | None = None) -> np.ndarray:
    """Bits served in each block given its power gain; error events are independent.

    A block whose coding rate is negative (deep fade, unclamped model)
    delivers nothing, so the result is always non-negative.
    """
    return _draw_services(strategy, params, z, rng, policy)[0]


def sample_service(strategy: StrategyModel, params: ChannelParams, z: float,
                   rng: np.random.Generator, policy: PowerPolicy | None = None) -> ServiceOutcome:
    bits, ok = _draw_services(strategy, params, np.array([z]), rng, policy)
    return ServiceOutcome(float(bits[0]), bool(ok[0]))


def lindley(increments: np.ndarray, q0: float = 0.0) -> np.ndarray:
    """Backlog after each step of ``Q <- max(Q + x, 0)`` starting from ``q0``.

    Uses ``Q_t = S_t - min(-q0, min_{k<=t} S_k)`` with ``S`` the partial sums.
    """
    s = np.cumsum(increments)
    return s - np.minimum(np.minimum.accumulate(s), -q0)


def _replica_stream(config: SimConfig, seed_seq, policy):
    """Yield backlog chunks (post-warmup) for one replica."""
    rng = make_rng(seed_seq)
    a = config.arrival_bits_per_block
    q = 0.0
    done = 0
    while done < config.num_blocks:
        n = min(_CHUNK, config.num_blocks - done)
        z = sample_gain(config.params.fading, rng, n)
        served = sample_services(config.strategy, config.params, z, rng, policy)
        backlog = lindley(a - served, q)
        q = float(backlog[-1])
        skip = max(0, config.warmup_blocks - done)
        done += n
        if skip < n:
            yield backlog[skip:]


def _run_replica(config: SimConfig, seed_seq, policy, edges: np.ndarray):
    hist = np.zeros(len(edges), dtype=np.int64)
    bins = np.append(edges, np.inf)
    n = 0
    total = 0.0
    zeros = 0
    qmax = 0.0
    half_sums = [0.0, 0.0]
    kept = config.num_blocks - config.warmup_blocks
    for chunk in _replica_stream(config, seed_seq, policy):
        counts, _ = np.histogram(chunk, bins=bins)
        hist += counts
        first = max(0, min(len(chunk), kept // 2 - n))
        half_sums[0] += float(chunk[:first].sum())
        half_sums[1] += float(chunk[first:].sum())
        n += len(chunk)
        total += float(chunk.sum())
        zeros += int(np.count_nonzero(chunk == 0.0))
        qmax = max(qmax, float(chunk.max()))
    tail = np.cumsum(hist[::-1])[::-1]
    return tail, n, total, zeros, qmax, half_sums


def _pilot_grid(config: SimConfig, seed_seq, policy) -> np.ndarray:
    pilot = next(_replica_stream(config, seed_seq, policy), np.zeros(1))
    top = 2.0 * float(pilot.max())
    if top <= 0:
        top = max(config.arrival_bits_per_block, 1.0)
    return np.linspace(0.0, top, _GRID_POINTS)


def estimate_decay_exponent(trace: QueueTrace, q_lo: float | None = None, q_hi: float | None = None,
                            min_points: int = 20, min_count: int = 100) -> tuple[float, float]:
    """Fit ``ln P(Q >= q) ~ c - theta q`` over ``[q_lo, q_hi]``.

    The default window runs from the 90th to the 99.9th percentile of the
    backlog; closer to zero the exponential tail shape does not hold yet.
    Returns ``(theta_hat, stderr)`` from least squares.
    """
    p = trace.tail_probability()
    q = np.asarray(trace.q_grid, dtype=float)
    if q_lo is None:
        idx = np.nonzero(p <= 0.1)[0]
        q_lo = q[idx[0]] if len(idx) else q[-1]
    if q_hi is None:
        idx = np.nonzero(p >= 1e-3)[0]
        q_hi = q[idx[-1]] if len(idx) else q[0]
    sel = (q >= q_lo) & (q <= q_hi) & (trace.tail_counts >= min_count) & (q > 0)
    if np.count_nonzero(sel) < min_points:
        raise EstimationError(
            f"only {np.count_nonzero(sel)} tail points with >= {min_count} counts in "
            f"[{q_lo:.4g}, {q_hi:.4g}] (need {min_points}); increase num_blocks")
    fit = stats.linregress(q[sel], np.log(p[sel]))
    return -float(fit.slope), float(fit.stderr)


def simulate_queue(config: SimConfig, spec: QuadratureSpec = DEFAULT_QUADRATURE,
                   allow_unstable: bool = False, workers: int = 1) -> QueueTrace:
    """Run the buffer simulation and fit the tail decay exponent.

    Deterministic for a fixed seed. Replicas use independent substreams
    spawned from ``config.seed`` and their histograms are summed.
    """
    policy = None
    if isinstance(config.strategy, PowerAdapted):
        policy = solve_alpha(config.params, QosSpec(config.policy_theta), spec)
    capacity = mean_service_bits(config.strategy, config.params, spec, policy)
    if config.arrival_bits_per_block >= capacity and not allow_unstable:
        raise InstabilityError(
            f"arrival {config.arrival_bits_per_block:.6g} bits/block >= mean service "
            f"{capacity:.6g} bits/block; the queue does not drain")

    seeds = np.random.SeedSequence(config.seed).spawn(config.replicas)
    edges = (np.asarray(config.q_grid, dtype=float) if config.q_grid is not None
             else _pilot_grid(config, seeds[0], policy))
    args = [(config, s, policy, edges) for s in seeds]
    if workers > 1 and config.replicas > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_replica, *zip(*args)))
    else:
        parts = [_run_replica(*a) for a in args]

    tail = sum(p[0] for p in parts)
    n = sum(p[1] for p in parts)
    total = sum(p[2] for p in parts)
    zeros = sum(p[3] for p in parts)
    qmax = max(p[4] for p in parts)
    half = n // (2 * config.replicas)
    stable = True
    for *_, (h1, h2) in parts:
        m1, m2 = h1 / max(half, 1), h2 / max(half, 1)
        if m2 > 2.0 * m1 + config.arrival_bits_per_block:
            stable = False
    trace = QueueTrace(
        q_grid=edges, tail_counts=np.asarray(tail, dtype=np.int64), total_blocks=int(n),
        mean_queue=total / n, drained_fraction=zeros / n, max_queue=qmax, stable=stable,
        replica_means=[p[2] / p[1] for p in parts])
    if not stable:
        trace.note = "queue unstable: backlog grows over the run; no exponent fitted"
        log.warning(trace.note)
        return trace
    if qmax == 0.0:
        trace.note = "empty tail"
        return trace
    try:
        trace.theta_hat, trace.theta_stderr = estimate_decay_exponent(trace)
        p = trace.tail_probability()
        trace.fit_window = (float(edges[np.nonzero(p <= 0.1)[0][0]]),
                            float(edges[np.nonzero(p >= 1e-3)[0][-1]]))
    except EstimationError as exc:
        trace.note = str(exc)
    return trace
