"""Block-fading channel description and fading statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .exceptions import DomainError
from .numerics import DEFAULT_QUADRATURE, QuadratureSpec, expect_over_fading


@dataclass(frozen=True)
class Rayleigh:
    """Rayleigh fading: the power gain ``z = |h|^2`` is exponential."""

    mean_power: float = 1.0

    def __post_init__(self):
        if not (self.mean_power > 0 and math.isfinite(self.mean_power)):
            raise DomainError(f"mean_power must be positive, got {self.mean_power!r}")


@dataclass(frozen=True)
class Deterministic:
    """A fixed power gain; reduces every formula to the AWGN case."""

    z: float = 1.0

    def __post_init__(self):
        if not (self.z >= 0 and math.isfinite(self.z)):
            raise DomainError(f"z must be finite and >= 0, got {self.z!r}")


FadingModel = Union[Rayleigh, Deterministic]


@dataclass(frozen=True)
class ChannelParams:
    """Average SNR (linear), coherence blocklength and fading model.

    ``clamp_nonnegative`` replaces negative normal-approximation rates by
    zero; it is off by default so the formulas are evaluated as written.
    """

    snr: float
    blocklength_m: int
    fading: FadingModel = field(default_factory=Rayleigh)
    clamp_nonnegative: bool = False

    def __post_init__(self):
        if not (self.snr > 0 and math.isfinite(self.snr)):
            raise DomainError(f"snr must be positive, got {self.snr!r}")
        if int(self.blocklength_m) != self.blocklength_m or self.blocklength_m < 1:
            raise DomainError(f"blocklength_m must be an integer >= 1, got {self.blocklength_m!r}")
        if not isinstance(self.fading, (Rayleigh, Deterministic)):
            raise DomainError(f"unsupported fading model {self.fading!r}")

    @classmethod
    def from_db(cls, snr_db: float, blocklength_m: int, **kwargs) -> "ChannelParams":
        return cls(snr=db_to_linear(snr_db), blocklength_m=blocklength_m, **kwargs)

    @property
    def m(self) -> int:
        return int(self.blocklength_m)


@dataclass(frozen=True)
class QosSpec:
    """QoS exponent ``theta`` in 1/bit; zero means no buffer constraint."""

    theta: float = 0.0

    def __post_init__(self):
        if not (self.theta >= 0 and math.isfinite(self.theta)):
            raise DomainError(f"theta must be finite and >= 0, got {self.theta!r}")


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """Counter-based (Philox) generator; independent substreams via SeedSequence.spawn."""
    return np.random.Generator(np.random.Philox(seed))


def sample_gain(model: FadingModel, rng: np.random.Generator, size=None):
    """Draw i.i.d. power gains, one per coherence block.

    Rayleigh gains use the inverse-CDF transform ``-mean * log(1 - U)``.
    """
    if isinstance(model, Deterministic):
        if size is None:
            return float(model.z)
        return np.full(size, float(model.z))
    u = rng.random(size)
    return -model.mean_power * np.log1p(-u)


def fading_expectation(model: FadingModel, f: Callable, spec: QuadratureSpec = DEFAULT_QUADRATURE,
                       breakpoints: Sequence[float] = ()) -> float:
    """``E{f(z)}`` under the fading model; exact for the deterministic model."""
    if isinstance(model, Deterministic):
        val = float(np.asarray(f(np.asarray(float(model.z)))))
        if not math.isfinite(val):
            raise FloatingPointError("integrand produced a non-finite value")
        return val
    s = model.mean_power
    if s == 1.0:
        return expect_over_fading(f, spec, breakpoints)
    return expect_over_fading(lambda x: f(s * x), spec, [b / s for b in breakpoints])


def gain_quantile(model: FadingModel, q: float) -> float:
    """Inverse CDF of the power gain."""
    if isinstance(model, Deterministic):
        return float(model.z)
    return -model.mean_power * math.log1p(-q)
