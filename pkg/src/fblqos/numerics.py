"""Special functions, fading expectations and scalar solvers.

Everything here is a pure function of its arguments. The quadrature rules
integrate against the unit-mean exponential density ``exp(-z)`` on
``[0, inf)``, i.e. they compute ``E{f(z)}`` for Rayleigh block fading with
unit average power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .exceptions import BracketError, DomainError

SQRT_2PI = math.sqrt(2.0 * math.pi)

SCHEMES = ("composite", "gauss-laguerre", "adaptive-trapezoid")

# Integration is truncated at z = U_MAX**2; exp(-50) ~ 2e-22.
_U_MAX = math.sqrt(50.0)
_U_MAX_TRAPEZOID = math.sqrt(40.0)
_COARSE_WIDTH = 0.25


# ---------------------------------------------------------------------------
# Gaussian Q-function and its inverse
# ---------------------------------------------------------------------------

def gaussian_q(x):
    """Tail probability of the standard normal, ``Q(x) = P(N(0,1) > x)``.

    Accepts scalars or arrays. Large positive arguments underflow cleanly
    to 0.0; ``erfc`` keeps full relative accuracy in the upper tail.
    """
    out = 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


# Rational approximation of the normal quantile (P. J. Acklam), relative
# error below 1.2e-9, used only as the Newton starting point.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _upper_quantile_guess(p: np.ndarray) -> np.ndarray:
    """Rough ``Q^{-1}(p)`` for ``0 < p <= 1/2`` (result is >= 0)."""
    x = np.empty_like(p)
    tail = p < _P_LOW
    if np.any(tail):
        q = np.sqrt(-2.0 * np.log(p[tail]))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        x[tail] = -num / den
    mid = ~tail
    if np.any(mid):
        q = p[mid] - 0.5
        r = q * q
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[mid] = -num / den
    return x


def _check_open_unit(p: np.ndarray, name: str = "p") -> None:
    if not np.all((p > 0.0) & (p < 1.0)):
        raise DomainError(f"{name} must lie strictly inside (0, 1), got {p!r}")


def gaussian_q_inv(p):
    """Inverse of :func:`gaussian_q` for ``0 < p < 1``.

    The rational guess is polished with two Newton steps that use the
    closed-form derivative ``dQ^{-1}/dp = -sqrt(2 pi) exp(x^2 / 2)``.
    Work is done on ``min(p, 1 - p)`` (exact in floating point for
    ``p >= 1/2``) so the iteration always runs in the upper tail.
    """
    arr = np.asarray(p, dtype=float)
    _check_open_unit(arr)
    flat = np.atleast_1d(arr)
    upper = flat > 0.5
    small = np.where(upper, 1.0 - flat, flat)
    x = _upper_quantile_guess(small)
    for _ in range(2):
        x = x + (gaussian_q(x) - small) * SQRT_2PI * np.exp(0.5 * x * x)
    x = np.where(upper, -x, x)
    # Q(0) = 1/2 exactly; keep the symmetric point exact.
    x = np.where(flat == 0.5, 0.0, x)
    return float(x[0]) if arr.ndim == 0 else x.reshape(arr.shape)


def q_inv_derivatives(p):
    """First and second derivatives of ``Q^{-1}`` at ``p``.

    Returns ``(-sqrt(2 pi) e^{x^2/2}, 2 pi x e^{x^2})`` with ``x = Q^{-1}(p)``.
    """
    x = gaussian_q_inv(p)
    first = -SQRT_2PI * np.exp(0.5 * np.square(x))
    second = 2.0 * math.pi * x * np.exp(np.square(x))
    if np.ndim(x) == 0:
        return float(first), float(second)
    return first, second


# ---------------------------------------------------------------------------
# Expectation over exponential fading
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureSpec:
    """How to evaluate ``E{f(z)}`` for ``z ~ Exp(1)``.

    ``composite`` (default) integrates in ``u = sqrt(z)`` on panels graded
    geometrically towards zero and towards every breakpoint, with
    ``node_count`` Gauss-Legendre points per panel. ``gauss-laguerre`` is
    the classical ``node_count``-point rule (breakpoints are ignored).
    ``adaptive-trapezoid`` halves the step on ``[0, 40]`` until the
    estimate settles, starting from ``node_count`` intervals per segment.
    """

    node_count: int = 16
    scheme: str = "composite"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise DomainError(f"unknown quadrature scheme {self.scheme!r}")
        if int(self.node_count) != self.node_count or self.node_count < 8:
            raise DomainError(f"node_count must be an integer >= 8, got {self.node_count!r}")


DEFAULT_QUADRATURE = QuadratureSpec()


def _graded_edges(anchor: float, finest: float) -> list[float]:
    out = []
    d = _COARSE_WIDTH
    while d >= finest:
        out.extend((anchor - d, anchor + d))
        d *= 0.5
    return out


@lru_cache(maxsize=4096)
def _composite_rule(node_count: int, breaks_u: tuple[float, ...]):
    edges = list(np.linspace(0.0, _U_MAX, int(round(_U_MAX / _COARSE_WIDTH)) + 1))
    edges += _graded_edges(0.0, 1e-16)
    for b in breaks_u:
        edges.append(b)
        edges += _graded_edges(b, max(1e-13 * b, 1e-18))
    e = np.unique(np.clip(np.asarray(edges), 0.0, _U_MAX))
    lo, hi = e[:-1], e[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    x, w = np.polynomial.legendre.leggauss(node_count)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    u = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wu = (half[:, None] * w[None, :]).ravel()
    z = u * u
    weights = wu * 2.0 * u * np.exp(-z)
    z.setflags(write=False)
    weights.setflags(write=False)
    return z, weights


@lru_cache(maxsize=64)
def _laguerre_rule(node_count: int):
    z, w = special.roots_laguerre(node_count)
    z.setflags(write=False)
    w.setflags(write=False)
    return z, w


def exponential_rule(spec: QuadratureSpec = DEFAULT_QUADRATURE,
                     breakpoints: Sequence[float] = ()):
    """Nodes ``z`` and weights ``w`` with ``sum(w * f(z)) ~ E{f(z)}``, z ~ Exp(1).

    Only fixed rules are available this way; ``adaptive-trapezoid`` has no
    fixed node set.
    """
    if spec.scheme == "gauss-laguerre":
        return _laguerre_rule(spec.node_count)
    if spec.scheme != "composite":
        raise DomainError(f"scheme {spec.scheme!r} has no fixed node set")
    breaks_u = tuple(sorted({math.sqrt(b) for b in breakpoints
                             if 0.0 < b < _U_MAX ** 2 and math.isfinite(b)}))
    return _composite_rule(spec.node_count, breaks_u)


def _evaluate(f: Callable, z: np.ndarray) -> np.ndarray:
    vals = np.broadcast_to(np.asarray(f(z), dtype=float), z.shape)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("integrand produced a non-finite value")
    return vals


def _trapezoid_segment(f: Callable, a: float, b: float, n0: int) -> float:
    def g(u):
        return _evaluate(f, u * u) * 2.0 * u * np.exp(-u * u)

    n = n0
    u = np.linspace(a, b, n + 1)
    vals = g(u)
    h = (b - a) / n
    total = h * (vals.sum() - 0.5 * (vals[0] + vals[-1]))
    for _ in range(24):
        h *= 0.5
        mids = a + h * (2 * np.arange(n) + 1)
        refined = 0.5 * total + h * g(mids).sum()
        n *= 2
        if abs(refined - total) <= 1e-13 * max(abs(refined), 1e-300) or abs(refined - total) < 1e-15:
            return refined
        total = refined
    return total


def expect_over_fading(f: Callable, spec: QuadratureSpec = DEFAULT_QUADRATURE,
                       breakpoints: Sequence[float] = ()) -> float:
    """Return ``E{f(z)}`` for ``z`` exponentially distributed with unit mean.

    ``f`` must accept a numpy array of ``z`` values. ``breakpoints`` are
    points in ``z`` where ``f`` has a kink or a steep transition; the
    composite and trapezoid schemes put panel edges there.
    """
    if spec.scheme == "adaptive-trapezoid":
        cuts = sorted({math.sqrt(b) for b in breakpoints
                       if 0.0 < b < _U_MAX_TRAPEZOID ** 2})
        edges = [0.0, *cuts, _U_MAX_TRAPEZOID]
        return float(sum(_trapezoid_segment(f, a, b, spec.node_count)
                         for a, b in zip(edges[:-1], edges[1:])))
    z, w = exponential_rule(spec, breakpoints)
    return float(w @ _evaluate(f, z))


# ---------------------------------------------------------------------------
# Scalar solvers
# ---------------------------------------------------------------------------

def bisect_root(g: Callable[[float], float], lo: float, hi: float,
                tol: float = 1e-12, maxiter: int = 500, full_output: bool = False):
    """Bisection for a sign change of ``g`` on ``[lo, hi]``.

    Stops once the bracketing interval is no wider than ``tol`` and returns
    its midpoint. With ``full_output`` returns ``(x, (lo, hi), iterations)``
    where ``(lo, hi)`` is the final bracket.
    """
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return (lo, (lo, lo), 0) if full_output else lo
    if ghi == 0.0:
        return (hi, (hi, hi), 0) if full_output else hi
    if np.sign(glo) == np.sign(ghi) or not (np.isfinite(glo) and np.isfinite(ghi)):
        raise BracketError(f"no sign change on [{lo}, {hi}]: g(lo)={glo}, g(hi)={ghi}")
    it = 0
    while hi - lo > tol and it < maxiter:
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        it += 1
        if gm == 0.0:
            lo = hi = mid
            break
        if np.sign(gm) == np.sign(glo):
            lo, glo = mid, gm
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    return (x, (lo, hi), it) if full_output else x


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_minimize(g: Callable[[float], float], lo: float, hi: float,
                    tol: float = 1e-8, maxiter: int = 500, full_output: bool = False):
    """Golden-section search for the minimum of a unimodal ``g`` on ``[lo, hi]``.

    The endpoints are evaluated explicitly at the end, so a minimum sitting
    on the boundary is returned exactly. Returns ``(argmin, min)``, plus the
    iteration count when ``full_output`` is set.
    """
    a, b = float(lo), float(hi)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    gc, gd = g(c), g(d)
    it = 0
    while b - a > tol and it < maxiter:
        if gc <= gd:
            b, d, gd = d, c, gc
            c = b - _INV_PHI * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + _INV_PHI * (b - a)
            gd = g(d)
        it += 1
    x = 0.5 * (a + b)
    candidates = [(g(x), x), (gc, c), (gd, d), (g(lo), lo), (g(hi), hi)]
    fx, x = min(candidates, key=lambda t: t[0])
    return (x, fx, it) if full_output else (x, fx)
