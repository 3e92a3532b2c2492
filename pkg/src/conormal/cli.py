"""Command-line front end: ``conormal <command> [options]``.

Exit status: 0 when every check passes, 1 on a computational failure or a
failed check, 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import boundary as bmod
from .config import ConfigError, RunConfig, build_boundary, build_lagrangian, load_config
from .hamiltonian import IntegrationError, integrate_flow
from .index_theorem import IndexTheoremError, oscillator_family, reports_to_csv, sweep_report, verify_index_theorem, zero_orbit
from .lagrangian import CriticalPath, MorseIndexError, fenchel_dual, morse_index_crossing, morse_index_eigen
from .maslov import LagrangianPath, MaslovError, conley_zehnder, maslov_report
from .morse_complex import MorseComplexError, build_complex
from .shooting import SolverOptions, orbits_to_json, solve_nonlocal_bvp
from .symplectic import HalfInteger, LagrangianFrame, SymplecticError

FIXTURES = Path(__file__).parent / "fixtures"
COMPUTATIONAL = (MaslovError, IntegrationError, MorseIndexError, MorseComplexError, IndexTheoremError,
                 SymplecticError, np.linalg.LinAlgError, bmod.BoundaryViolation)


def half(h: HalfInteger) -> dict:
    return h.to_json()


def _dump(doc, args) -> str:
    text = json.dumps(doc, indent=2, sort_keys=True)
    out = getattr(args, "output", None)
    if out:
        Path(out).write_text(text + "\n")
    return text


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {
        ("system", "preset"): getattr(args, "preset", None),
        ("system", "omega"): getattr(args, "omega", None),
        ("system", "eps"): getattr(args, "eps", None),
        ("system", "period"): getattr(args, "period", None),
        ("boundary", "type"): getattr(args, "boundary", None),
        ("boundary", "q0"): getattr(args, "q0", None),
        ("boundary", "q1"): getattr(args, "q1", None),
        ("boundary", "winding"): getattr(args, "winding", None),
        ("solver", "seeds"): getattr(args, "seeds", None),
        ("solver", "seed"): getattr(args, "seed", None),
        ("solver", "step"): getattr(args, "step", None),
        ("index", "omegas"): getattr(args, "omegas", None),
        ("morse", "classes"): getattr(args, "classes", None),
    }
    return cfg.merged(overrides)


def _system(cfg):
    lag = build_lagrangian(cfg)
    bnd = build_boundary(cfg, lag.n, lag.periods)
    return lag, bnd


# ---------------------------------------------------------------- commands


def cmd_maslov(args) -> int:
    path = LagrangianPath.from_csv(args.path)
    if args.target == "vertical":
        target = LagrangianPath.constant(LagrangianFrame.vertical(path.n), path.interval)
    elif args.target == "horizontal":
        target = LagrangianPath.constant(LagrangianFrame.horizontal(path.n), path.interval)
    else:
        target = LagrangianPath.from_csv(args.target)
    rep = maslov_report(path, target, grid=args.grid)
    doc = {
        "index": half(rep.index),
        "perturbed": rep.perturbed,
        "crossings": [
            {"t": c.t, "dim": c.dim, "signature": c.signature, "endpoint": c.endpoint, "regular": c.regular}
            for c in rep.crossings
        ],
    }
    print(_dump(doc, args))
    return 0


def cmd_cz(args) -> int:
    if args.path:
        data = np.loadtxt(args.path, delimiter=",", comments="#", ndmin=2, skiprows=_header_rows(args.path))
        m = int(round(np.sqrt(data.shape[1] - 1)))
        times, mats = data[:, 0], data[:, 1:].reshape(-1, m, m)
        from scipy.interpolate import CubicSpline

        spline = CubicSpline(times, mats, axis=0)
        g_fn, dg_fn, interval = spline, spline.derivative(), (times[0], times[-1])
    else:
        cfg = _config(args)
        lag = build_lagrangian(cfg)
        flow = integrate_flow(fenchel_dual(lag), np.zeros(2 * lag.n), step=cfg.get("solver", "step", 1e-3))
        from scipy.interpolate import CubicSpline

        spline = CubicSpline(flow.times, flow.monodromy, axis=0)
        g_fn, dg_fn, interval = spline, spline.derivative(), (0.0, 1.0)
    index = conley_zehnder(g_fn, interval, dg_fn)
    print(_dump({"conley_zehnder": half(index)}, args))
    return 0


def _header_rows(path) -> int:
    with open(path) as fh:
        first = fh.readline()
    try:
        [float(v) for v in first.split(",")]
        return 0
    except ValueError:
        return 1


def _solver_options(cfg) -> SolverOptions:
    g = lambda k, d: cfg.get("solver", k, d)
    return SolverOptions(step=g("step", 1e-3), tol=g("tol", 1e-9), seeds=g("seeds", 32),
                         box=(g("box_lo", -2.0), g("box_hi", 2.0)), seed=g("seed", 0),
                         merge_tol=g("merge_tol", 1e-6))


def cmd_solve_bvp(args) -> int:
    cfg = _config(args)
    lag, bnd = _system(cfg)
    orbits = solve_nonlocal_bvp(fenchel_dual(lag), bnd, opts=_solver_options(cfg))
    text = orbits_to_json(orbits)
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)
    return 0 if orbits else 1


def cmd_morse_index(args) -> int:
    cfg = _config(args)
    lag, bnd = _system(cfg)
    flow = zero_orbit(lag, cfg.get("solver", "step", 1e-3))
    if bnd.constraint_residual(flow.x0[: lag.n], flow.x1[: lag.n]) > 1e-9:
        orbits = solve_nonlocal_bvp(fenchel_dual(lag), bnd, opts=_solver_options(cfg))
        if not orbits:
            print("no orbit found", file=sys.stderr)
            return 1
        flow = orbits[0].flow
    gamma = CriticalPath.from_flow(flow)
    eig = morse_index_eigen(lag, gamma, bnd, mesh=cfg.get("index", "mesh", 64))
    cross = morse_index_crossing(lag, gamma, bnd, grid=cfg.get("index", "mu_grid", 512))
    doc = {
        "eigen": {"index": eig.index, "nullity": eig.nullity, "elements": eig.elements},
        "crossing": {"index": cross.index, "nullity": cross.nullity, "c": cross.shift},
        "agree": tuple(eig) == tuple(cross),
    }
    print(_dump(doc, args))
    return 0 if doc["agree"] else 1


def cmd_verify_index(args) -> int:
    cfg = _config(args)
    omegas = cfg.get("index", "omegas", None)
    if omegas and cfg.get("system", "preset", "harmonic") == "harmonic":
        kind = cfg.get("boundary", "type", "dirichlet")
        if kind not in ("dirichlet", "neumann"):
            raise ConfigError("omega sweeps support dirichlet or neumann boundaries")
        reports = sweep_report(oscillator_family(omegas, kind))
    else:
        lag, bnd = _system(cfg)
        flow = zero_orbit(lag, cfg.get("solver", "step", 1e-3))
        n = lag.n
        if bnd.constraint_residual(flow.x0[:n], flow.x1[:n]) > 1e-9 or bnd.conormal_residual(
            flow.x0[:n], flow.x0[n:], flow.x1[:n], flow.x1[n:]
        ) > 1e-9:
            orbits = solve_nonlocal_bvp(fenchel_dual(lag), bnd, opts=_solver_options(cfg))
            if not orbits:
                print("no orbit found", file=sys.stderr)
                return 1
            flow = orbits[0].flow
        reports = [verify_index_theorem(lag, bnd, flow, label=cfg.get("system", "preset", "harmonic"))]
    table = reports_to_csv(reports)
    out_csv = args.csv or cfg.get("output", "csv", None)
    if out_csv:
        Path(out_csv).write_text(table)
    sys.stdout.write(table)
    ok = all(r.passed for r in reports)
    first = reports[0]
    print(f"summary: {sum(r.passed for r in reports)}/{len(reports)} passed; "
          f"i={first.morse_index} mu_Q={first.mu_q} nu={first.nullity_h} -> {'pass' if ok else 'FAIL'}")
    if args.output:
        _dump([r.to_json() for r in reports], args)
    return 0 if ok else 1


def cmd_morse_complex(args) -> int:
    cfg = _config(args)
    lag = build_lagrangian(cfg)
    kind = cfg.get("boundary", "type", "diagonal")
    kind = {"periodic": "diagonal"}.get(kind, kind)
    classes = cfg.get("morse", "classes", [0]) if kind != "neumann" else [0]
    q0 = cfg.get("boundary", "q0", [0.0])[0]
    q1 = cfg.get("boundary", "q1", [0.0])[0]
    out = []
    ok = True
    for m in classes:
        inst = build_complex(lag, kind, m, nodes=cfg.get("morse", "nodes", 64), endpoints=(q0, q1),
                             starts=cfg.get("morse", "starts", 24), seed=cfg.get("solver", "seed", 0))
        doc = inst.to_json()
        ok &= doc["boundary_squared_zero"] and doc["morse_inequalities"]
        out.append(doc)
    print(_dump({"classes": out}, args))
    return 0 if ok else 1


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest(verbose=True)
    return 0 if all(ok for _, ok, _ in results) else 1


# ---------------------------------------------------------------- parser


def _floats(text):
    return [float(v) for v in text.split(",") if v]


def _ints(text):
    return [int(v) for v in text.split(",") if v]


def _add_system_flags(p):
    p.add_argument("--config", help="INI run configuration")
    p.add_argument("--preset", help="free, harmonic, pendulum, magnetic, polynomial, double-well")
    p.add_argument("--omega", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--period", type=float)
    p.add_argument("--boundary", help="dirichlet, neumann, diagonal, figure8, custom")
    p.add_argument("--q0", type=_floats)
    p.add_argument("--q1", type=_floats)
    p.add_argument("--winding", type=_ints)
    p.add_argument("--seeds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--step", type=float)
    p.add_argument("--output", "-o", help="write the JSON report here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conormal", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("maslov", help="relative Maslov index of a sampled Lagrangian path")
    p.add_argument("--path", required=True, help="CSV: t followed by the 2n x n frame, row-major")
    p.add_argument("--target", default="vertical", help="vertical, horizontal or a path CSV")
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_maslov)

    p = sub.add_parser("cz", help="Conley-Zehnder index of a symplectic path or of a preset's flow")
    _add_system_flags(p)
    p.add_argument("--path", help="CSV: t followed by the 2n x 2n matrix, row-major")
    p.set_defaults(func=cmd_cz)

    p = sub.add_parser("solve-bvp", help="multistart shooting for the boundary value problem")
    _add_system_flags(p)
    p.set_defaults(func=cmd_solve_bvp)

    p = sub.add_parser("morse-index", help="Morse index by eigencount and by crossing count")
    _add_system_flags(p)
    p.set_defaults(func=cmd_morse_index)

    p = sub.add_parser("verify-index", help="check the index theorem; CSV table and summary line")
    _add_system_flags(p)
    p.add_argument("--omegas", type=_floats, help="harmonic sweep, e.g. 1,2,4,7")
    p.add_argument("--csv", help="write the CSV table here")
    p.set_defaults(func=cmd_verify_index)

    p = sub.add_parser("morse-complex", help="Z/2 Morse complex on path spaces of the circle")
    _add_system_flags(p)
    p.add_argument("--classes", type=_ints, help="winding classes, e.g. -1,0,1")
    p.set_defaults(func=cmd_morse_complex)

    p = sub.add_parser("selftest", help="run the shipped fixtures")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        if isinstance(exc, COMPUTATIONAL):
            print(f"{args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
            return 1
        print(f"{args.command}: input error: {exc}", file=sys.stderr)
        return 2
    except COMPUTATIONAL as exc:
        print(f"{args.command}: {type(exc).__name__} in {type(exc).__module__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
