"""Command-line front end.

Subcommands: ``rate``, ``optimize``, ``sweep``, ``figure``, ``simulate``.
Values come from flags, then from the ``--config`` INI file (section named
after the subcommand, falling back to ``[DEFAULT]``), then built-in defaults.

Exit codes: 0 ok, 2 usage/domain error, 3 solver failure, 4 unstable queue.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys

import numpy as np

from .channel import ChannelParams, Deterministic, QosSpec, Rayleigh, db_to_linear, linear_to_db
from .effective import (
    STRATEGY_KINDS,
    FixedRate,
    ParallelPair,
    PowerAdapted,
    effective_rate,
    power_policy_mu,
    solve_alpha,
)
from .exceptions import BracketError, DomainError, EstimationError, InstabilityError, SolverError
from .fbl import coding_rate, coding_rate_parallel, coding_rate_power_adapted, error_prob_fixed_rate
from .figures import FIGURES, figure_dataset
from .numerics import QuadratureSpec
from .optimize import SweepSpec, optimal_eps, optimal_fixed_rate, sweep
from .queuesim import SimConfig, simulate_queue

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_UNSTABLE = 0, 2, 3, 4

# option name -> (type, default)
OPTIONS = {
    "snr_db": (float, 0.0),
    "snr": (float, None),
    "m": (int, 1000),
    "theta": (float, 0.0),
    "strategy": (str, "variable"),
    "eps": (float, None),
    "rate_fixed": (float, None),
    "fading": (str, "rayleigh"),
    "z": (float, None),
    "nodes": (int, None),
    "scheme": (str, "composite"),
    "clamp_nonnegative": (bool, False),
    "seed": (int, 0),
    "blocks": (int, 1_000_000),
    "warmup": (int, 10_000),
    "replicas": (int, 1),
    "workers": (int, 1),
    "arrival": (float, None),
    "arrival_theta": (float, None),
    "axis": (str, None),
    "grid": (str, None),
    "out": (str, None),
    "format": (str, "csv"),
}


class UsageError(Exception):
    pass


def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("channel and strategy")
    g.add_argument("--config", help="INI file with defaults (section per subcommand)")
    g.add_argument("--snr-db", type=float, help="average SNR in dB (default 0)")
    g.add_argument("--snr", type=float, help="average SNR, linear (overrides --snr-db)")
    g.add_argument("--m", type=int, help="coherence blocklength in channel uses (default 1000)")
    g.add_argument("--theta", type=float, help="QoS exponent in 1/bit (default 0)")
    g.add_argument("--strategy", choices=sorted(STRATEGY_KINDS), help="transmission strategy")
    g.add_argument("--eps", type=float, help="block error probability, in (0, 1)")
    g.add_argument("--rate-fixed", type=float, help="fixed rate r_f in bits per channel use")
    g.add_argument("--fading", help="'rayleigh', 'rayleigh:<mean>' or 'deterministic:<z>'")
    g.add_argument("--nodes", type=int, help="quadrature node count (per panel for composite)")
    g.add_argument("--scheme", choices=["composite", "gauss-laguerre", "adaptive-trapezoid"])
    g.add_argument("--clamp-nonnegative", action="store_true", default=None,
                   help="replace negative coding rates by zero")
    o = p.add_argument_group("output")
    o.add_argument("--out", help="output file (default stdout)")
    o.add_argument("--format", choices=["csv", "json"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fblqos", description="Effective rate of block-fading links with finite-blocklength codes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", help="evaluate the effective rate at one operating point")
    _add_common(p)
    p.add_argument("--z", type=float, help="also report the per-block rate at this power gain")

    p = sub.add_parser("optimize", help="optimal eps (or r_f for --strategy fixed)")
    _add_common(p)

    p = sub.add_parser("sweep", help="evaluate or optimise along one axis")
    _add_common(p)
    p.add_argument("--axis", choices=["theta", "m", "snr", "snr_db", "eps", "r_f"])
    p.add_argument("--grid", help="comma list, or log:lo:hi:n / lin:lo:hi:n")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("figure", help="dataset behind one figure")
    _add_common(p)
    p.add_argument("figure_id", type=int, help=f"1..{max(FIGURES)}")

    p = sub.add_parser("simulate", help="buffer simulation and tail-exponent fit")
    _add_common(p)
    p.add_argument("--arrival", type=float, help="arrival in bits per block")
    p.add_argument("--arrival-theta", type=float,
                   help="set the arrival to m * R_E(theta) of the chosen strategy")
    p.add_argument("--seed", type=int)
    p.add_argument("--blocks", type=int, help="blocks per replica (>= 100000)")
    p.add_argument("--warmup", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--workers", type=int)
    return parser


def _resolve(args: argparse.Namespace) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        cp = configparser.ConfigParser()
        if not cp.read(args.config):
            raise UsageError(f"--config: cannot read {args.config!r}")
        section = cp[args.command] if cp.has_section(args.command) else cp.defaults()
        cfg = {k.replace("-", "_"): v for k, v in section.items()}
    out = {}
    for name, (typ, default) in OPTIONS.items():
        val = getattr(args, name, None)
        if val is None and name in cfg:
            raw = cfg[name]
            try:
                if typ is bool:
                    val = raw.strip().lower() in ("1", "true", "yes", "on")
                else:
                    val = typ(raw)
            except ValueError:
                raise UsageError(f"{name}: cannot parse {raw!r} from config") from None
        out[name] = default if val is None else val
    return out


def _fading(text: str):
    kind, _, arg = text.partition(":")
    try:
        if kind == "rayleigh":
            return Rayleigh(float(arg) if arg else 1.0)
        if kind == "deterministic":
            return Deterministic(float(arg) if arg else 1.0)
    except ValueError:
        pass
    raise UsageError(f"--fading: cannot parse {text!r}")


def _params(opt: dict) -> ChannelParams:
    snr = opt["snr"] if opt["snr"] is not None else db_to_linear(opt["snr_db"])
    if not snr > 0:
        raise UsageError(f"--snr: must be positive, got {snr}")
    if opt["m"] < 1:
        raise UsageError(f"--m: must be >= 1, got {opt['m']}")
    return ChannelParams(snr, opt["m"], _fading(opt["fading"]), bool(opt["clamp_nonnegative"]))


def _qos(opt: dict) -> QosSpec:
    th = opt["theta"]
    if not (th >= 0 and math.isfinite(th)):
        raise UsageError(f"--theta: must be >= 0, got {th}")
    return QosSpec(th)


def _quadrature(opt: dict) -> QuadratureSpec:
    scheme = opt["scheme"]
    nodes = opt["nodes"]
    if nodes is None:
        nodes = {"composite": 16, "gauss-laguerre": 200, "adaptive-trapezoid": 64}[scheme]
    if nodes < 8:
        raise UsageError(f"--nodes: must be >= 8, got {nodes}")
    return QuadratureSpec(nodes, scheme)


def _strategy(opt: dict):
    kind = STRATEGY_KINDS[opt["strategy"]]
    if kind is FixedRate:
        r = opt["rate_fixed"]
        if r is None:
            raise UsageError("--rate-fixed: required for --strategy fixed")
        if not (r > 0 and math.isfinite(r)):
            raise UsageError(f"--rate-fixed: must be positive, got {r}")
        return FixedRate(r)
    e = opt["eps"]
    if e is None:
        raise UsageError(f"--eps: required for --strategy {opt['strategy']}")
    if not 0.0 < e < 1.0:
        raise UsageError(f"--eps: eps must lie strictly inside (0, 1), got {e}")
    return kind(e)


def _parse_grid(text: str | None) -> tuple[float, ...]:
    if not text:
        raise UsageError("--grid: required")
    try:
        if text.startswith(("log:", "lin:")):
            kind, lo, hi, n = text.split(":")
            fn = np.geomspace if kind == "log" else np.linspace
            return tuple(float(v) for v in fn(float(lo), float(hi), int(n)))
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--grid: cannot parse {text!r}") from None


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _render(rows: list[dict], fmt: str, meta: dict | None = None) -> str:
    if fmt == "json":
        rows = [{k: v.item() if isinstance(v, np.generic) else v for k, v in r.items()} for r in rows]
        return json.dumps({**(meta or {}), "rows": rows}, indent=1) + "\n"
    cols: list[str] = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(v) for k, v in r.items()})
    return buf.getvalue()


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _strategy_columns(s) -> dict:
    if isinstance(s, FixedRate):
        return {"strategy": "fixed", "r_f_bits_per_cu": s.r_f}
    name = {v: k for k, v in STRATEGY_KINDS.items()}[type(s)]
    return {"strategy": name, "eps": s.eps}


def _base_columns(params: ChannelParams, qos: QosSpec) -> dict:
    return {"snr": params.snr, "snr_db": linear_to_db(params.snr), "m_channel_uses": params.m,
            "theta_per_bit": qos.theta}


def cmd_rate(opt: dict) -> int:
    params, qos, spec = _params(opt), _qos(opt), _quadrature(opt)
    strategy = _strategy(opt)
    res = effective_rate(strategy, params, qos, spec)
    row = {**_base_columns(params, qos), **_strategy_columns(strategy)}
    if opt["z"] is not None:
        z = opt["z"]
        if z < 0:
            raise UsageError(f"--z: must be >= 0, got {z}")
        row["z"] = z
        if isinstance(strategy, FixedRate):
            row["block_error_prob"] = error_prob_fixed_rate(z, params, strategy.r_f)
        elif isinstance(strategy, ParallelPair):
            row["rbar_bits_per_cu"] = coding_rate_parallel(z, params, strategy.eps)
        elif isinstance(strategy, PowerAdapted):
            mu = power_policy_mu(z, solve_alpha(params, qos, spec))
            row["rbar_bits_per_cu"] = coding_rate_power_adapted(z, mu, params, strategy.eps)
        else:
            row["rbar_bits_per_cu"] = coding_rate(z, params, strategy.eps)
    row["R_E_bits_per_cu"] = res.rate
    row["quadrature_nodes"] = res.diagnostics.get("nodes")
    row["solver_iterations"] = res.diagnostics.get("solver_iterations")
    _emit(_render([row], opt["format"]), opt["out"])
    return EXIT_OK


def cmd_optimize(opt: dict) -> int:
    params, qos, spec = _params(opt), _qos(opt), _quadrature(opt)
    kind = STRATEGY_KINDS[opt["strategy"]]
    res = (optimal_fixed_rate(params, qos, spec) if kind is FixedRate
           else optimal_eps(kind, params, qos, spec))
    row = {**_base_columns(params, qos), "strategy": opt["strategy"],
           ("r_f_star_bits_per_cu" if kind is FixedRate else "eps_star"): res.arg,
           "R_E_star_bits_per_cu": res.value, "iterations": res.iterations,
           "bracket_lo": res.bracket[0], "bracket_hi": res.bracket[1]}
    _emit(_render([row], opt["format"]), opt["out"])
    return EXIT_OK


def cmd_sweep(opt: dict) -> int:
    params, qos, spec = _params(opt), _qos(opt), _quadrature(opt)
    axis = opt["axis"]
    if axis is None:
        raise UsageError("--axis: required")
    grid = _parse_grid(opt["grid"])
    kind = STRATEGY_KINDS[opt["strategy"]]
    have_param = opt["rate_fixed"] if kind is FixedRate else opt["eps"]
    # evaluate a given strategy, otherwise optimise its parameter per point
    strategy = _strategy(opt) if (have_param is not None and axis not in ("eps", "r_f")) else kind
    try:
        sspec = SweepSpec(axis, grid, params, qos, strategy, spec)
    except DomainError as exc:
        raise UsageError(f"--grid/--axis: {exc}") from None
    rows = []
    for r in sweep(sspec, workers=opt["workers"]):
        row = {axis: r.value}
        if r.result is None:
            row["error"] = r.error
        elif hasattr(r.result, "arg"):
            row["arg_star"] = r.result.arg
            row["R_E_star_bits_per_cu"] = r.result.value
            row["iterations"] = r.result.iterations
        else:
            row["R_E_bits_per_cu"] = r.result.rate
        rows.append(row)
    _emit(_render(rows, opt["format"], {"axis": axis, "strategy": opt["strategy"]}), opt["out"])
    return EXIT_OK


def cmd_figure(opt: dict, figure_id: int) -> int:
    if figure_id not in FIGURES:
        raise UsageError(f"figure_id: unknown figure {figure_id}; valid ids are 1..{max(FIGURES)}")
    rows = figure_dataset(figure_id, _params(opt), _quadrature(opt))
    _emit(_render(rows, opt["format"], {"figure": figure_id, "title": FIGURES[figure_id][0]}),
          opt["out"])
    return EXIT_OK


def cmd_simulate(opt: dict) -> int:
    params, qos, spec = _params(opt), _qos(opt), _quadrature(opt)
    strategy = _strategy(opt)
    if (opt["arrival"] is None) == (opt["arrival_theta"] is None):
        raise UsageError("--arrival / --arrival-theta: give exactly one")
    if opt["arrival"] is not None:
        arrival = opt["arrival"]
    else:
        th0 = opt["arrival_theta"]
        if not th0 > 0:
            raise UsageError(f"--arrival-theta: must be > 0, got {th0}")
        arrival = params.m * effective_rate(strategy, params, QosSpec(th0), spec).rate
    try:
        config = SimConfig(strategy, params, arrival, num_blocks=opt["blocks"],
                           warmup_blocks=opt["warmup"], seed=opt["seed"],
                           replicas=opt["replicas"], policy_theta=qos.theta)
    except DomainError as exc:
        raise UsageError(f"simulation config: {exc}") from None
    code = EXIT_OK
    try:
        trace = simulate_queue(config, spec, workers=opt["workers"])
    except InstabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        trace = simulate_queue(config, spec, allow_unstable=True, workers=opt["workers"])
        code = EXIT_UNSTABLE
    if not trace.stable:
        code = EXIT_UNSTABLE
    if opt["out"]:
        with open(opt["out"], "w", newline="") as fh:
            trace.to_csv(fh)
    summary = {"snr": params.snr, "snr_db": linear_to_db(params.snr), "m_channel_uses": params.m,
               "policy_theta_per_bit": qos.theta, **_strategy_columns(strategy),
               "arrival_theta_per_bit": opt["arrival_theta"] if opt["arrival_theta"] is not None else "",
               "arrival_bits_per_block": arrival, "blocks": trace.total_blocks,
               "seed": opt["seed"], "mean_queue_bits": trace.mean_queue,
               "drained_fraction": trace.drained_fraction, "max_queue_bits": trace.max_queue,
               "theta_hat_per_bit": trace.theta_hat if trace.theta_hat is not None else "",
               "theta_hat_stderr": trace.theta_stderr if trace.theta_stderr is not None else "",
               "note": trace.note or ("" if trace.stable else "unstable")}
    sys.stdout.write(_render([summary], opt["format"]))
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opt = _resolve(args)
        if args.command == "rate":
            return cmd_rate(opt)
        if args.command == "optimize":
            return cmd_optimize(opt)
        if args.command == "sweep":
            return cmd_sweep(opt)
        if args.command == "figure":
            return cmd_figure(opt, args.figure_id)
        return cmd_simulate(opt)
    except (UsageError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, BracketError, EstimationError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
