"""Command line front end.

    schrocert solve CONFIG [--pin-constants] [-o OUT]
    schrocert budget CONFIG [--pin-constants]
    schrocert reference NAME --t 0,0.5 --x -5:5:101
    schrocert demo-blowup [-o OUT]
    schrocert discrepancy --bases 2,3 --N 1024

Exit codes: 0 success, 2 configuration error, 3 budget infeasible,
4 numeric failure.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .budget import plan, replay, uniform_runtime_estimate
from .core import BudgetInfeasible, ConfigError, Family, NumericFailure, SamplingError
from .qmc import certificate

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_NUMERIC = 0, 2, 3, 4
THREADS_ENV = "SCHROCERT_THREADS"


def _g(v) -> str:
    return "%.17g" % v


def _apply_threads():
    n = os.environ.get(THREADS_ENV)
    if not n:
        return
    try:
        import numba

        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
    except (ValueError, ImportError):
        raise ConfigError(f"{THREADS_ENV} must be a positive integer") from None


def header_lines(cfg, budget, pinned: bool) -> list:
    lines = [f"schrocert-version = {__version__}",
             f"problem = {cfg.builtin or 'config'}",
             f"family = {cfg.problem.family.value}",
             f"dimension = {cfg.problem.dimension}",
             f"horizon = {_g(cfg.problem.horizon)}",
             f"mu = {_g(cfg.problem.mu)}",
             f"pinned_constants = {pinned}"]
    lines += budget.serialize()
    lines.append(f"runtime.operations = {uniform_runtime_estimate(budget)}")
    return ["# " + s for s in lines]


def write_trajectory(fh, cfg, result, pinned):
    for line in header_lines(cfg, result.budget, pinned):
        fh.write(line + "\n")
    tr = result.trajectory
    if cfg.problem.family is Family.LATTICE_NLS:
        d = cfg.problem.dimension
        n = int(result.budget.params["R"])
        k = np.arange(-n, n + 1)
        grids = np.meshgrid(*([k] * d), indexing="ij")
        coords = np.stack([g.ravel() for g in grids], axis=-1)
        names = ["k"] if d == 1 else [f"k{i + 1}" for i in range(d)]
        fmt = ["%d"] * d
    else:
        R, m, d = tr.grid
        from .core import box_midpoints

        coords = box_midpoints(R, m, d)
        names = ["x"] if d == 1 else [f"x{i + 1}" for i in range(d)]
        fmt = ["%.17g"] * d
    fh.write(",".join(["t"] + names + ["re", "im", "density"]) + "\n")
    rowfmt = ",".join(["%.17g"] + fmt + ["%.17g", "%.17g", "%.17g"])
    for t, snap in zip(tr.times, tr.snapshots):
        v = np.asarray(snap).ravel()
        block = np.column_stack([np.full(len(v), t), coords, v.real, v.imag, v.real ** 2 + v.imag ** 2])
        np.savetxt(fh, block, fmt=rowfmt)


def _parse_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _parse_range(text):
    parts = text.split(":")
    if len(parts) == 3:
        return np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))
    return np.array(_parse_list(text))


def cmd_solve(args):
    from .config import load
    from .pipeline import solve

    cfg = load(args.config)
    consts = cfg.budget_constants(args.pin_constants)
    budget = plan(cfg.problem, cfg.state, cfg.potential, cfg.eps, consts, cfg.lattice)
    result = solve(cfg.problem, cfg.state, cfg.potential, cfg.eps, budget=budget, stride=cfg.stride,
                   lattice=cfg.lattice)
    out = args.output or cfg.output
    if out in (None, "-"):
        write_trajectory(sys.stdout, cfg, result, args.pin_constants)
    else:
        with open(out, "w", newline="\n") as fh:
            write_trajectory(fh, cfg, result, args.pin_constants)
    return EXIT_OK


def cmd_budget(args):
    from .config import load

    cfg = load(args.config)
    budget = plan(cfg.problem, cfg.state, cfg.potential, cfg.eps, cfg.budget_constants(args.pin_constants),
                  cfg.lattice)
    for line in header_lines(cfg, budget, args.pin_constants):
        print(line)
    bad = replay(budget)
    print(f"# replay = {'ok' if not bad else 'violated: ' + ', '.join(bad)}")
    return EXIT_OK if not bad else EXIT_BUDGET


def cmd_reference(args):
    from .problems import reference

    ts = _parse_list(args.t)
    xs = _parse_range(args.x)
    rows = []
    for t in ts:
        try:
            v = np.broadcast_to(np.asarray(reference(args.name, t, xs), dtype=complex), xs.shape)
        except ValueError as err:
            raise ConfigError(str(err)) from None
        rows += [(t, x, z.real, z.imag, abs(z) ** 2) for x, z in zip(xs, v)]
    print(f"# schrocert-version = {__version__}")
    print(f"# reference = {args.name}")
    print("t,x,re,im,density")
    for r in rows:
        print(",".join(_g(a) for a in r))
    return EXIT_OK


def cmd_demo_blowup(args):
    from .pipeline import demo_blowup

    rep = demo_blowup()
    lines = [f"# schrocert-version = {__version__}",
             f"# T_star = {_g(rep.T_star)}",
             f"# grid = R {_g(rep.grid[0])}, m {rep.grid[1]}, tau {_g(rep.grid[2])}",
             f"# exact_ratio_9_to_9.9 = {_g(rep.exact_ratio)}",
             f"# numerical_ratio_9_to_9.9 = {_g(rep.numerical_ratio)}",
             f"# plateau = {rep.plateau}",
             "t,exact_amplitude,numerical_sup"]
    lines += [",".join(_g(v) for v in row) for row in rep.rows()]
    text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if rep.plateau else EXIT_NUMERIC


def cmd_discrepancy(args):
    bases = tuple(int(b) for b in args.bases.split(","))
    from .qmc import HaltonConfig

    HaltonConfig(bases, args.N)  # validates coprimality
    cert = certificate(bases, args.N)
    for k in ("N", "d", "bound", "c_star", "bases", "horizon"):
        v = getattr(cert, k)
        print(f"{k} = {_g(v) if isinstance(v, float) else v}")
    if args.brute:
        from .qmc import halton_points, star_discrepancy_brute

        print(f"brute = {_g(star_discrepancy_brute(halton_points(bases, args.N)))}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="schrocert", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("solve", help="plan the budget and propagate")
    p.add_argument("config")
    p.add_argument("--pin-constants", action="store_true", help="use pinned (calibrated or unit) constants")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_solve)
    p = sub.add_parser("budget", help="plan only and print the ledger")
    p.add_argument("config")
    p.add_argument("--pin-constants", action="store_true")
    p.set_defaults(fn=cmd_budget)
    p = sub.add_parser("reference", help="closed-form reference solutions")
    p.add_argument("name")
    p.add_argument("--t", default="0")
    p.add_argument("--x", default="-5:5:11")
    p.set_defaults(fn=cmd_reference)
    p = sub.add_parser("demo-blowup", help="focusing quintic blow-up versus the numerical plateau")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_demo_blowup)
    p = sub.add_parser("discrepancy", help="star-discrepancy certificate of Halton points")
    p.add_argument("--bases", default="2")
    p.add_argument("--N", type=int, default=1024)
    p.add_argument("--brute", action="store_true", help="also compute D* exactly (small N only)")
    p.set_defaults(fn=cmd_discrepancy)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _apply_threads()
        return args.fn(args)
    except (ConfigError, SamplingError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetInfeasible as err:
        print(f"budget infeasible ({err.share}): {err}", file=sys.stderr)
        return EXIT_BUDGET
    except NumericFailure as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
