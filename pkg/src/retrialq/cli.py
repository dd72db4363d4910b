"""Command-line front end.

Exit codes: 0 success, 1 invalid configuration, 2 unstable model,
3 convergence failure, 4 search budget exhausted.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .configio import apply_sweep_point, load_config
from .errors import (BudgetExhaustedError, ConfigError, ConvergenceError,
                     UnstableError)
from .generator import state_count
from .measures import performance_report
from .models import (arrival_rate, batch_arrival_rate, retrial_rate,
                     service_rate, validate)
from .optimize import ensure_budget, optimize_c, optimize_g
from .sim import simulate
from .solver import solve_stationary
from .stability import stability_check

SIGNIFICANT = 12


@dataclass(frozen=True)
class RunManifest:
    config_path: str
    command: str
    seed: int | None = None
    epsilon: float | None = None
    epsilon0: float | None = None
    output: str | None = None

    def digest(self):
        h = hashlib.sha256(repr(self).encode())
        return h.hexdigest()[:16]


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.{SIGNIFICANT}g}"


def _header_lines(manifest, captured_mass=None, epsilon=None, epsilon0=None):
    parts = [f"manifest={manifest.digest()}", f"version={__version__}"]
    if captured_mass is not None:
        parts.append(f"captured_mass={captured_mass:.{SIGNIFICANT}g}")
    if epsilon is not None:
        parts.append(f"epsilon={epsilon:g}")
    if epsilon0 is not None:
        parts.append(f"epsilon0={epsilon0:g}")
    return ["# " + " ".join(parts)]


def _write_csv(path, header_lines, columns, rows):
    buf = io.StringIO()
    for line in header_lines:
        buf.write(line + "\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(columns)
    for row in rows:
        wr.writerow([_fmt(v) if isinstance(v, (int, float, np.floating,
                                               np.integer)) else v
                     for v in row])
    text = buf.getvalue()
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)


def _print_kv(pairs, stream=None):
    stream = stream or sys.stdout
    for key, val in pairs:
        stream.write(f"{key} = {_fmt(val) if isinstance(val, (int, float)) else val}\n")


def _load(args):
    cfg, sweep = load_config(args.config)
    overrides = {}
    if getattr(args, "epsilon", None) is not None:
        overrides["epsilon"] = args.epsilon
    if getattr(args, "epsilon0", None) is not None:
        overrides["epsilon0"] = args.epsilon0
    if getattr(args, "n_max", None) is not None:
        overrides["n_max"] = args.n_max
    if overrides:
        from dataclasses import replace
        cfg = replace(cfg, **overrides)
    return cfg, sweep


def cmd_validate(args):
    cfg, _ = _load(args)
    report = validate(cfg)
    if report:
        for violation in report:
            print(f"INVALID {violation}")
        return 1
    r, w, v, m = cfg.dims
    print(f"OK c={cfg.c} g={cfg.g} phases R={r} W={w} V={v} M={m} "
          f"K={state_count(cfg.c, r, w, v, m)}")
    return 0


def cmd_rates(args):
    cfg, _ = _load(args)
    report = validate(cfg)
    if report:
        raise ConfigError(report)
    _print_kv([
        ("lambda_1", arrival_rate(cfg.bmap1)),
        ("lambda_b1", batch_arrival_rate(cfg.bmap1)),
        ("lambda_2", arrival_rate(cfg.bmap2)),
        ("lambda_b2", batch_arrival_rate(cfg.bmap2)),
        ("sigma", retrial_rate(cfg.mmpp)),
        ("mu", service_rate(cfg.service)),
    ])
    return 0


def cmd_stability(args):
    cfg, _ = _load(args)
    rep = stability_check(cfg)
    _print_kv([
        ("lambda_1", rep.lambda_1), ("lambda_2", rep.lambda_2),
        ("mu_bar_1", rep.mu_bar_1), ("mu_bar_2", rep.mu_bar_2),
        ("rho", rep.rho), ("stable", str(rep.stable).lower()),
        ("near_critical", str(rep.near_critical).lower()),
    ])
    return 0


def cmd_solve(args):
    cfg, _ = _load(args)
    manifest = RunManifest(args.config, "solve", epsilon=cfg.epsilon,
                           epsilon0=cfg.epsilon0, output=args.output)
    dist = solve_stationary(cfg)
    _write_csv(args.output,
               _header_lines(manifest, dist.captured_mass,
                             cfg.epsilon, cfg.epsilon0),
               ["level", "busy", "probability"], dist.to_rows())
    return 0


def cmd_measures(args):
    cfg, _ = _load(args)
    dist = solve_stationary(cfg)
    rep = performance_report(dist)
    if args.output not in (None, "-"):
        manifest = RunManifest(args.config, "measures", epsilon=cfg.epsilon,
                               epsilon0=cfg.epsilon0, output=args.output)
        items = list(rep.as_dict().items())
        _write_csv(args.output,
                   _header_lines(manifest, rep.captured_mass,
                                 cfg.epsilon, cfg.epsilon0),
                   [k for k, _ in items], [[v for _, v in items]])
    else:
        _print_kv(rep.as_dict().items())
    return 0


def cmd_simulate(args):
    cfg, _ = _load(args)
    manifest = RunManifest(args.config, "simulate", seed=args.seed,
                           output=args.output)
    est = simulate(cfg, horizon=args.horizon, replications=args.replications,
                   seed=args.seed)
    rows = []
    for i in range(est.joint.shape[0]):
        for b in range(est.joint.shape[1]):
            if est.joint[i, b] > 0:
                rows.append((i, b, est.joint[i, b]))
    _write_csv(args.output, _header_lines(manifest),
               ["level", "busy", "probability"], rows)
    _print_kv([
        ("L_b", est.l_busy), ("L_b_hw", est.l_busy_hw),
        ("L_orb", est.l_orbit), ("L_orb_hw", est.l_orbit_hw),
        ("P_b1", est.p_block_1), ("P_b1_hw", est.p_block_1_hw),
        ("P_b2", est.p_block_2), ("P_b2_hw", est.p_block_2_hw),
        ("replications", est.replications), ("horizon", est.horizon),
        ("seed", est.seed), ("drift", str(est.drift).lower()),
        ("flow_balance_ok", str(est.flow_balance_ok).lower()),
    ], sys.stderr if args.output in (None, "-") else sys.stdout)
    return 0


def _emit_optimum(args, result, manifest):
    _write_csv(args.output, _header_lines(manifest),
               ["g", "c", "P_b1", "P_b2"], result.evaluation_rows())
    kv = [("status", result.status)]
    if result.g_star is not None:
        kv.append(("g_star", result.g_star))
    if result.c_star is not None:
        kv.append(("c_star", result.c_star))
    _print_kv(kv, sys.stderr if args.output in (None, "-") else sys.stdout)


def cmd_optimize_g(args):
    cfg, _ = _load(args)
    manifest = RunManifest(args.config, "optimize-g", output=args.output)
    result = optimize_g(cfg, p0=args.p0)
    _emit_optimum(args, result, manifest)
    return 0


def cmd_optimize_c(args):
    cfg, _ = _load(args)
    manifest = RunManifest(args.config, "optimize-c", output=args.output)
    result = optimize_c(cfg, p1=args.p1, p2=args.p2, c_max=args.c_max)
    _emit_optimum(args, result, manifest)
    ensure_budget(result)
    return 0


def _sweep_point(payload):
    cfg, param, value = payload
    point = apply_sweep_point(cfg, param, value)
    rep = stability_check(point)
    if not rep.stable:
        return (value, None, rep.rho)
    dist = solve_stationary(point)
    perf = performance_report(dist)
    return (value, perf, rep.rho)


def cmd_sweep(args):
    cfg, sweep = _load(args)
    if sweep is None:
        from .models import Violation
        raise ConfigError([Violation("config-file", "sweep block required")])
    manifest = RunManifest(args.config, "sweep", output=args.output)
    payloads = [(cfg, sweep.parameter, v) for v in sweep.values]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_point, payloads))
    else:
        results = [_sweep_point(p) for p in payloads]
    rows = []
    for value, perf, rho in results:   # grid order is preserved by map
        if perf is None:
            rows.append((value, "", "", "", "", rho))
        else:
            rows.append((value, perf.l_orbit, perf.p_block_1,
                         perf.p_block_2, perf.l_busy, rho))
    _write_csv(args.output, _header_lines(manifest),
               [sweep.parameter, "L_orb", "P_b1", "P_b2", "L_b", "rho"], rows)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="retrialq",
        description="Stationary analysis of a two-class retrial queue "
                    "with guard servers")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **extra):
        p = sub.add_parser(name)
        p.add_argument("config", help="YAML model file")
        p.add_argument("-o", "--output", default=None,
                       help="output CSV path ('-' for stdout)")
        p.add_argument("--epsilon", type=float, default=None)
        p.add_argument("--epsilon0", type=float, default=None)
        p.add_argument("--n-max", type=int, default=None)
        p.set_defaults(func=fn)
        return p

    add("validate", cmd_validate)
    add("rates", cmd_rates)
    add("stability", cmd_stability)
    add("solve", cmd_solve)
    add("measures", cmd_measures)
    p = add("simulate", cmd_simulate)
    p.add_argument("--horizon", type=float, default=1e6)
    p.add_argument("--replications", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p = add("optimize-g", cmd_optimize_g)
    p.add_argument("--p0", type=float, required=True)
    p = add("optimize-c", cmd_optimize_c)
    p.add_argument("--p1", type=float, required=True)
    p.add_argument("--p2", type=float, required=True)
    p.add_argument("--c-max", type=int, default=16)
    p = add("sweep", cmd_sweep)
    p.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except UnstableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except BudgetExhaustedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


def console_main():
    raise SystemExit(main())


if __name__ == "__main__":
    console_main()
