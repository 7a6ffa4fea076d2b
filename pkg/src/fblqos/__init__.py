"""Effective rate of block-fading links under finite-blocklength coding and ARQ."""

from .channel import ChannelParams, Deterministic, QosSpec, Rayleigh
from .effective import (
    FixedRate,
    ParallelPair,
    PowerAdapted,
    VariableRate,
    effective_rate,
    ideal_effective_rate,
)
from .numerics import QuadratureSpec
from .optimize import optimal_eps, optimal_fixed_rate

__all__ = [
    "ChannelParams", "Deterministic", "QosSpec", "Rayleigh",
    "FixedRate", "ParallelPair", "PowerAdapted", "VariableRate",
    "effective_rate", "ideal_effective_rate", "QuadratureSpec",
    "optimal_eps", "optimal_fixed_rate",
]
__version__ = "0.1.0"
