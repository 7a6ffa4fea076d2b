"""Datasets behind the throughput figures (one function per figure id).

Each builder returns a list of flat dict rows; column names carry units
(``_bits_per_cu`` = bits per channel use, ``_per_bit`` for QoS exponents).
Defaults are SNR = 0 dB, m = 1000, Rayleigh fading with unit mean.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Callable

import numpy as np

from .channel import ChannelParams, QosSpec
from .effective import (
    FixedRate,
    ParallelPair,
    PowerAdapted,
    VariableRate,
    effective_rate,
    ideal_effective_rate,
    kernel_mean,
    outage_probability,
)
from .exceptions import DomainError
from .numerics import DEFAULT_QUADRATURE, QuadratureSpec
from .optimize import optimal_eps, optimal_fixed_rate

PSI_THETAS = (0.001, 0.01, 0.1)
RATE_THETAS = (0.0, 0.001, 0.01, 0.1)
THETA_GRID = tuple(np.geomspace(1e-3, 1.0, 40))
SNR_DB_GRID = tuple(np.arange(-10.0, 20.0 + 1e-9, 2.5))
SNR_THETAS = (0.0, 0.001, 0.01)
M_GRID = tuple(sorted({int(round(v)) for v in np.geomspace(100, 20000, 30)}))
EPS_GRID = tuple(np.geomspace(1e-4, 0.5, 80))
RF_GRID = tuple(np.linspace(0.02, 3.0, 150))


def _default_params() -> ChannelParams:
    return ChannelParams(snr=1.0, blocklength_m=1000)


def fig_psi_vs_eps(params, spec):
    rows = []
    for th in PSI_THETAS:
        qos = QosSpec(th)
        star = optimal_eps(VariableRate, params, qos, spec).arg
        for e in EPS_GRID:
            rows.append({"theta_per_bit": th, "eps": e,
                         "psi": kernel_mean(VariableRate(e), params, qos, spec),
                         "eps_star": star})
    return rows


def fig_rate_vs_eps(params, spec):
    rows = []
    for th in RATE_THETAS:
        qos = QosSpec(th)
        best = optimal_eps(VariableRate, params, qos, spec)
        for e in EPS_GRID:
            rows.append({"theta_per_bit": th, "eps": e,
                         "R_E_bits_per_cu": effective_rate(VariableRate(e), params, qos, spec).rate,
                         "eps_star": best.arg, "R_E_star_bits_per_cu": best.value})
    return rows


def fig_optimum_vs_theta(params, spec):
    rows = []
    for th in THETA_GRID:
        best = optimal_eps(VariableRate, params, QosSpec(th), spec)
        rows.append({"theta_per_bit": th, "R_E_star_bits_per_cu": best.value, "eps_star": best.arg})
    return rows


def fig_eps_star_vs_theta(params, spec):
    return [{"theta_per_bit": r["theta_per_bit"], "eps_star": r["eps_star"]}
            for r in fig_optimum_vs_theta(params, spec)]


def fig_rate_vs_blocklength(params, spec):
    rows = []
    for th in (0.0, 0.001):
        qos = QosSpec(th)
        for m in M_GRID:
            p = replace(params, blocklength_m=m)
            best = optimal_eps(VariableRate, p, qos, spec)
            rows.append({"theta_per_bit": th, "m_channel_uses": m,
                         "R_E_star_bits_per_cu": best.value, "eps_star": best.arg,
                         "R_E_ideal_bits_per_cu": ideal_effective_rate(p, qos, spec)})
    return rows


def _snr_rows(params, spec):
    rows = []
    for th in SNR_THETAS:
        for snr_db in SNR_DB_GRID:
            p = replace(params, snr=10.0 ** (snr_db / 10.0))
            best = optimal_eps(VariableRate, p, QosSpec(th), spec)
            rows.append({"theta_per_bit": th, "snr_db": snr_db,
                         "R_E_star_bits_per_cu": best.value, "eps_star": best.arg})
    return rows


def fig_rate_vs_snr(params, spec):
    return [{k: r[k] for k in ("theta_per_bit", "snr_db", "R_E_star_bits_per_cu")}
            for r in _snr_rows(params, spec)]


def fig_eps_vs_snr(params, spec):
    return [{k: r[k] for k in ("theta_per_bit", "snr_db", "eps_star")}
            for r in _snr_rows(params, spec)]


def fig_power_control(params, spec):
    rows = []
    for th in THETA_GRID:
        qos = QosSpec(th)
        fixed = optimal_eps(VariableRate, params, qos, spec)
        adapted = optimal_eps(PowerAdapted, params, qos, spec)
        rows.append({"theta_per_bit": th,
                     "R_E_star_fixed_power_bits_per_cu": fixed.value, "eps_star_fixed_power": fixed.arg,
                     "R_E_star_power_control_bits_per_cu": adapted.value,
                     "eps_star_power_control": adapted.arg})
    return rows


def fig_rate_vs_fixed_rate(params, spec):
    rows = []
    for th in RATE_THETAS:
        qos = QosSpec(th)
        for r in RF_GRID:
            rows.append({"theta_per_bit": th, "r_f_bits_per_cu": r,
                         "R_E_bits_per_cu": effective_rate(FixedRate(r), params, qos, spec).rate})
    return rows


def fig_fixed_vs_variable(params, spec):
    rows = []
    for th in THETA_GRID:
        qos = QosSpec(th)
        var = optimal_eps(VariableRate, params, qos, spec)
        fix = optimal_fixed_rate(params, qos, spec)
        rows.append({"theta_per_bit": th, "R_E_star_variable_bits_per_cu": var.value,
                     "R_E_star_fixed_bits_per_cu": fix.value})
    return rows


def fig_outage_limit(params, spec):
    rows = []
    for m in (100, 1000, 10000, 100000):
        p = replace(params, blocklength_m=m)
        for r in RF_GRID:
            rows.append({"m_channel_uses": m, "r_f_bits_per_cu": r,
                         "R_E0_bits_per_cu": effective_rate(FixedRate(r), p, QosSpec(0.0), spec).rate})
    for r in RF_GRID:
        rows.append({"m_channel_uses": "inf", "r_f_bits_per_cu": r,
                     "R_E0_bits_per_cu": (1.0 - outage_probability(r, params)) * r})
    return rows


def fig_fixed_rate_star_vs_theta(params, spec):
    rows = []
    for th in THETA_GRID:
        best = optimal_fixed_rate(params, QosSpec(th), spec)
        rows.append({"theta_per_bit": th, "r_f_star_bits_per_cu": best.arg,
                     "R_E_star_bits_per_cu": best.value})
    return rows


def fig_parallel(params, spec):
    rows = []
    for th in (0.0,) + THETA_GRID:
        qos = QosSpec(th)
        single = optimal_eps(VariableRate, params, qos, spec)
        pair = optimal_eps(ParallelPair, params, qos, spec)
        rows.append({"theta_per_bit": th,
                     "R_E_star_single_bits_per_cu": single.value, "eps_star_single": single.arg,
                     "R_E_star_parallel_bits_per_cu": pair.value, "eps_star_parallel": pair.arg})
    return rows


FIGURES: dict[int, tuple[str, Callable]] = {
    1: ("Psi(eps) vs eps", fig_psi_vs_eps),
    2: ("effective rate vs eps", fig_rate_vs_eps),
    3: ("optimal effective rate vs theta", fig_optimum_vs_theta),
    4: ("optimal eps vs theta", fig_eps_star_vs_theta),
    5: ("optimal effective rate vs blocklength, with ideal model", fig_rate_vs_blocklength),
    6: ("optimal effective rate vs SNR", fig_rate_vs_snr),
    7: ("optimal eps vs SNR", fig_eps_vs_snr),
    8: ("optimal effective rate with and without power control", fig_power_control),
    9: ("effective rate vs fixed rate", fig_rate_vs_fixed_rate),
    10: ("optimal fixed-rate vs variable-rate effective rate", fig_fixed_vs_variable),
    11: ("theta=0 fixed-rate throughput vs r_f, finite m and outage limit", fig_outage_limit),
    12: ("optimal fixed rate vs theta", fig_fixed_rate_star_vs_theta),
    13: ("single codeword vs two parallel codewords", fig_parallel),
}


def figure_dataset(figure_id: int, params: ChannelParams | None = None,
                   spec: QuadratureSpec = DEFAULT_QUADRATURE) -> list[dict]:
    if figure_id not in FIGURES:
        raise DomainError(f"unknown figure id {figure_id}; valid ids are 1..{max(FIGURES)}")
    return FIGURES[figure_id][1](params or _default_params(), spec)
