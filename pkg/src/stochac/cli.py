"""Command line entry point: ``stochac <subcommand> ...``.

Exit codes: 0 success, 1 invalid input, 2 solver failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import ParameterError, SolverError, StochacError

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3


def _out_dir(args) -> str:
    from .harness import default_out_dir

    out = args.out or default_out_dir()
    os.makedirs(out, exist_ok=True)
    return out


def _write_csv(path, header, rows):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _write_json(path, obj):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, default=float)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _print_json(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=float))


# --------------------------------------------------------------------------
# subcommands


def _mild_from_args(args, eps, kind, horizon):
    from .noise import mixing_approximation, mollified_approximation, sample_brownian

    if kind == "none":
        return None
    dt = args.path_dt
    if kind == "mixing":
        return mixing_approximation(args.seed, eps, args.gamma, getattr(args, "M", 1.0), horizon=horizon, ds=dt)
    return mollified_approximation(sample_brownian(args.seed, horizon, dt), eps, args.gamma)


def cmd_noise(args):
    from .noise import eval_path, mildness_report, mixing_approximation, mollified_approximation, sample_brownian

    base = sample_brownian(args.seed, args.horizon, args.dt)
    if args.kind == "mixing":
        p = mixing_approximation(args.seed, args.eps, args.gamma, args.M, horizon=args.horizon, ds=args.dt)
    else:
        p = mollified_approximation(base, args.eps, args.gamma)
    report = mildness_report(p, base).as_dict()
    report.update(kind=args.kind, eps=args.eps, gamma=args.gamma, seed=args.seed)
    _print_json(report)
    if args.report:
        _write_json(args.report, report)
    if args.csv:
        t = base.times
        rows = zip(t, base.values, eval_path(p, t, 0), eval_path(p, t, 1))
        _write_csv(args.csv, ["t", "B", "B_eps", "dB_eps"], rows)
    return EXIT_OK


def _parse_sweep(spec: str):
    try:
        lo, hi, n = spec.split(":")
        return np.linspace(float(lo), float(hi), int(n))
    except ValueError as exc:
        raise ParameterError(f"--sweep expects b_min:b_max:steps, got {spec!r}") from exc


def cmd_wave(args):
    from .reaction_wave import alpha_zero, solve_wave

    out = _out_dir(args)
    a0 = alpha_zero(L=args.L, n=args.n)
    bs = _parse_sweep(args.sweep) if args.sweep else [args.b]
    summary = []
    for b in bs:
        w = solve_wave(float(b), args.L, args.n)
        entry = {"b": w.b, "c": w.c, "h_minus": w.h_minus, "h_zero": w.h_zero, "h_plus": w.h_plus,
                 "lambda": w.lam, "C_decay": w.C_decay, "residual": w.residual}
        if args.alpha0 or len(bs) == 1:
            entry["alpha0"] = a0
        summary.append(entry)
        if len(bs) == 1:
            _write_csv(os.path.join(out, "wave_profile.csv"), ["xi", "q", "q_xi"], zip(w.xi, w.q, w.q_xi))
    _print_json(summary[0] if len(bs) == 1 else {"alpha0": a0, "waves": summary})
    return EXIT_OK


def _init_field(spec: str, grid, dim):
    from .grid import circle_distance, plane_distance, read_field

    if spec.startswith("circle"):
        R0 = float(spec.split(":", 1)[1]) if ":" in spec else 1.0
        if dim != 2:
            raise ParameterError("circle initial data need --dim 2")
        return circle_distance(grid, R0)
    if spec == "plane":
        return plane_distance(grid, 0.0)
    if spec.startswith("file:"):
        f, _ = read_field(spec[5:], origin=grid.origin, bc=grid.bc)
        if f.shape != grid.shape:
            raise ParameterError(f"field file shape {f.shape} does not match the grid {grid.shape}")
        return f
    raise ParameterError(f"--init must be circle:R0, plane or file:PATH, got {spec!r}")


def _grid(args, dx):
    from .grid import uniform_grid

    return uniform_grid(-args.half_width, args.half_width, dx, bc=args.bc, dim=args.dim)


def cmd_ac_run(args):
    from .allen_cahn import ACParams, ac_run, well_prepared_init
    from .oracle import FRONT_SIGN

    out = _out_dir(args)
    dx = args.dx or args.eps / 4
    grid = _grid(args, dx)
    rho = _init_field(args.init, grid, args.dim)
    mild = _mild_from_args(args, args.eps, args.noise, max(args.T, 1.0))
    p = ACParams(args.eps, args.dt, args.scheme)
    u0 = well_prepared_init(rho, args.eps, mild)
    dumps = os.path.join(out, "fields") if args.dump_fields else None
    run = ac_run(u0, p, mild, args.T, observe_every=args.observe_every, dump_dir=dumps)
    _write_csv(os.path.join(out, "ac_front.csv"), ["t", "position" if args.dim == 1 else "radius"], run.rows())
    manifest = {"command": "ac-run", "version": __version__, "seed": args.seed, "noise": args.noise,
                "gamma": args.gamma, "init": args.init, "T": args.T, "dim": args.dim,
                "front_sign": FRONT_SIGN, "max_abs_u": run.max_abs, "dumps": run.dumps, **run.params}
    _write_json(os.path.join(out, "ac_manifest.json"), manifest)
    _print_json({"final_metric": float(run.metric[-1]), "max_abs_u": run.max_abs, "out": out})
    return EXIT_OK


def cmd_mcf_run(args):
    from .level_set import mcf_run
    from .reaction_wave import alpha_zero

    out = _out_dir(args)
    grid = _grid(args, args.dx)
    w0 = _init_field(args.init, grid, args.dim)
    a0 = alpha_zero() if args.alpha0 == "auto" else float(args.alpha0)
    mild = None
    if args.seed is not None and a0 != 0:
        mild = _mild_from_args(args, args.eps_path, "mollified", max(args.T, 1.0))
    run = mcf_run(w0, mild, args.T, observe_every=args.observe_every, alpha0=a0)
    _write_csv(os.path.join(out, "mcf_front.csv"), ["t", "radius" if args.dim == 2 else "position", "extinct"],
               run.rows())
    manifest = {"command": "mcf-run", "version": __version__, "seed": args.seed, "alpha0": a0,
                "eps_path": args.eps_path, "gamma": args.gamma, "dx": args.dx, "T": args.T,
                "T_star": run.T_star, "extinct": run.extinct, "reinitialization": False,
                "interior_gap_cells": run.interior_gap, "fattened": run.fattened, **run.params}
    _write_json(os.path.join(out, "mcf_manifest.json"), manifest)
    _print_json({"T_star": run.T_star, "extinct": run.extinct, "final_metric": float(run.metric[-1])})
    return EXIT_OK


def cmd_verify_super(args):
    from .grid import uniform_grid
    from .noise import mollified_approximation, sample_brownian
    from .supersolution import supersolution_residual

    noise = None
    if args.seed is not None:
        base = sample_brownian(args.seed, max(1.0, args.T), 1e-4)
        noise = mollified_approximation(base, args.eps, args.gamma)
    L = args.R0 + 1.0
    grid = uniform_grid(-L, L, args.dx, dim=2)
    stats = supersolution_residual(args.eps, args.delta, args.a, noise, grid=grid, T=args.T,
                                   samples=args.samples, seed=args.seed or 0, R0=args.R0)
    _print_json(stats.as_dict())
    return EXIT_OK


def cmd_oracle(args):
    from .noise import sample_brownian
    from .oracle import radial_ensemble, radial_flow
    from .reaction_wave import alpha_zero

    a0 = alpha_zero() if args.alpha0 == "auto" else float(args.alpha0)
    if args.ensemble:
        ens = radial_ensemble(args.R0, args.d, a0, range(args.seed, args.seed + args.ensemble), args.T, args.dt)
        _print_json({"paths": args.ensemble, "T": args.T, "mean_R2": ens.second_moment(args.T),
                     "survival": ens.survival(args.T),
                     "predicted_mean_R2_no_absorption": args.R0**2 + (a0**2 - 2 * (args.d - 1)) * args.T})
        return EXIT_OK
    traj = radial_flow(args.R0, args.d, a0, sample_brownian(args.seed, args.T, args.dt), T=args.T)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["t", "R"])
    writer.writerows(zip(traj.times, traj.R))
    return EXIT_OK


def cmd_sweep(args):
    from .harness import emit_report, load_config, run_sweep

    cfg = load_config(args.config)
    rec = run_sweep(cfg, jobs=args.jobs)
    out = _out_dir(args)
    paths = [emit_report(rec, "csv", out), emit_report(rec, "json", out)]
    _print_json({"gaps": rec.gaps, "status": [e.status for e in rec.entries], "files": paths})
    return EXIT_SOLVER if rec.failed else EXIT_OK


def cmd_compare(args):
    from .harness import compare

    print(repr(compare(args.a, args.b)))
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stochac", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("noise", help="Brownian path, mild approximation and mildness report")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--horizon", type=float, default=1.0)
    s.add_argument("--dt", type=float, default=1e-4)
    s.add_argument("--kind", choices=["mollified", "mixing"], default="mollified")
    s.add_argument("--eps", type=float, default=0.05)
    s.add_argument("--gamma", type=float, default=0.4)
    s.add_argument("--M", type=float, default=1.0, help="bound of the mixing process")
    s.add_argument("--report", help="also write the report JSON here")
    s.add_argument("--csv", help="write t, B, B_eps, dB_eps samples here")
    s.set_defaults(fn=cmd_noise)

    s = sub.add_parser("wave", help="traveling wave of the bistable reaction")
    s.add_argument("--b", type=float, default=0.0)
    s.add_argument("--L", type=float, default=20.0)
    s.add_argument("--n", type=int, default=4001)
    s.add_argument("--alpha0", action="store_true", help="report alpha0 for every wave of a sweep")
    s.add_argument("--sweep", help="b_min:b_max:steps")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_wave)

    def grid_flags(s, dim_default):
        s.add_argument("--dim", type=int, choices=[1, 2], default=dim_default)
        s.add_argument("--half-width", type=float, default=2.0, help="domain is [-w, w]^dim")
        s.add_argument("--bc", choices=["neumann", "periodic"], default="neumann")
        s.add_argument("--init", default="circle:1.0", help="circle:R0, plane or file:PATH")
        s.add_argument("--T", type=float, default=0.25)
        s.add_argument("--observe-every", type=int, default=None)
        s.add_argument("--gamma", type=float, default=0.4)
        s.add_argument("--path-dt", type=float, default=1e-4)
        s.add_argument("--out")

    s = sub.add_parser("ac-run", help="Allen-Cahn run with front tracking")
    grid_flags(s, 2)
    s.add_argument("--eps", type=float, default=0.04)
    s.add_argument("--dx", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--scheme", choices=["explicit", "imex"], default="explicit")
    s.add_argument("--noise", choices=["none", "mollified", "mixing"], default="none")
    s.add_argument("--M", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--dump-fields", action="store_true")
    s.set_defaults(fn=cmd_ac_run)

    s = sub.add_parser("mcf-run", help="level-set mean curvature flow with path forcing")
    grid_flags(s, 2)
    s.add_argument("--alpha0", default="auto", help="auto or a number")
    s.add_argument("--seed", type=int, default=None, help="Brownian seed (omit for no forcing)")
    s.add_argument("--eps-path", type=float, default=0.02, help="smoothing level of the path")
    s.add_argument("--dx", type=float, default=4.0 / 256)
    s.set_defaults(fn=cmd_mcf_run)

    s = sub.add_parser("verify-super", help="sampled residual of the layered supersolution")
    s.add_argument("--eps", type=float, default=0.02)
    s.add_argument("--delta", type=float, default=0.1)
    s.add_argument("--a", type=float, default=0.1)
    s.add_argument("--seed", type=int, default=None, help="Brownian seed (omit for zero noise)")
    s.add_argument("--gamma", type=float, default=0.4)
    s.add_argument("--samples", type=int, default=4000)
    s.add_argument("--T", type=float, default=0.25)
    s.add_argument("--R0", type=float, default=1.0)
    s.add_argument("--dx", type=float, default=0.01, help="level-set grid step")
    s.set_defaults(fn=cmd_verify_super)

    s = sub.add_parser("oracle", help="radial front SDE")
    s.add_argument("--R0", type=float, default=1.0)
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--alpha0", default="auto")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--dt", type=float, default=1e-4)
    s.add_argument("--T", type=float, default=0.5)
    s.add_argument("--ensemble", type=int, default=0, help="number of paths (summary JSON)")
    s.set_defaults(fn=cmd_oracle)

    s = sub.add_parser("sweep", help="run an experiment config")
    s.add_argument("--config", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_sweep)

    s = sub.add_parser("compare", help="sup gap between two (t, metric) CSV files")
    s.add_argument("a")
    s.add_argument("b")
    s.set_defaults(fn=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage, which would read as a solver failure
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    try:
        return args.fn(args)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ParameterError, StochacError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
