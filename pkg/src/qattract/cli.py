"""Command-line front end.

Subcommands: ``solve`` (spectral response + summary), ``verify`` (set
certifications), ``basin`` (grid sweep), ``simulate`` (one trajectory),
``plot`` (SVG overlay of exported artifacts).  Exit codes: 0 pass,
1 usage/config error, 2 mathematical failure (divergence, threshold or a
failing certification), so scripts can tell the three apart.  Every
command writes a ``manifest.json`` into its output directory at the end;
re-running the manifest's argv reproduces the other outputs
byte-identically on the same platform.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
import time

import numpy as np

from . import __version__, attract, basin as basin_mod, invariants, regions
from .errors import ConfigError, QattractError
from .integrate import IntegratorSettings, PhaseState, integrate, write_events_csv, write_trajectory_csv
from .model import Nonlinearity, SystemConfig, equilibrium, estimate_forcing_bounds
from .qpsolve import harmonic_balance_solve, write_solution_csv, write_summary_json
from .svg import SvgOverlay
from .sysfile import parse_system_file

_VERIFY_SETS = ("hexagon", "S", "blowup", "sandwich", "quadrants")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qattract", description=__doc__)
    ap.add_argument("--version", action="version", version=f"qattract {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="system definition file")
        p.add_argument("--out", default="qattract-out", help="output directory")
        p.add_argument("--gamma", type=float, default=None, help="override dissipation")
        p.add_argument("--p", type=int, default=None, help="override monomial degree parameter")

    p = sub.add_parser("solve", help="solve the quasi-periodic response")
    common(p)

    p = sub.add_parser("verify", help="certify a trapping / blow-up construction")
    common(p)
    p.add_argument("--set", required=True, choices=_VERIFY_SETS, dest="which")
    p.add_argument("--x0", type=float, default=None, help="blow-up anchor depth (default 1.15 * barrier root)")

    p = sub.add_parser("basin", help="classify a grid of initial conditions")
    common(p)
    p.add_argument("--grid", required=True, help='"x0:x1:nx,y0:y1:ny"')
    p.add_argument("--tmax", type=float, default=200.0)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("simulate", help="integrate one initial condition")
    common(p)
    p.add_argument("x0", type=float)
    p.add_argument("y0", type=float)
    p.add_argument("--tmax", type=float, default=100.0)

    p = sub.add_parser("plot", help="overlay exported artifacts into one SVG")
    p.add_argument("--out", default="qattract-out")
    p.add_argument("--region", action="append", default=[], help="region JSON (with sibling arc CSVs)")
    p.add_argument("--trajectory", action="append", default=[], help="trajectory CSV")
    p.add_argument("--basin", default=None, help="basin CSV")
    return ap


def _load_config(args) -> SystemConfig:
    cfg = parse_system_file(args.config)
    if getattr(args, "gamma", None) is not None:
        cfg = SystemConfig(forcing=cfg.forcing, freq=cfg.freq, g=cfg.g, gamma=args.gamma)
    if getattr(args, "p", None) is not None:
        if cfg.g.kind == "poly":
            raise ConfigError("--p override applies to monomial nonlinearities only")
        g = Nonlinearity(cfg.g.kind, args.p)
        cfg = SystemConfig(forcing=cfg.forcing, freq=cfg.freq, g=g, gamma=cfg.gamma)
    return cfg


def _effective_argv(args) -> list:
    argv = [args.command]
    if getattr(args, "config", None):
        argv += ["--config", str(args.config)]
    argv += ["--out", str(args.out)]
    flags = [("gamma", "--gamma"), ("p", "--p"), ("grid", "--grid"),
             ("tmax", "--tmax"), ("workers", "--workers")]
    if args.command == "verify":
        flags += [("which", "--set"), ("x0", "--x0")]
    for name, flag in flags:
        val = getattr(args, name, None)
        if val is not None:
            text = str(val)
            # values starting with '-' must ride the '=' form or argparse
            # mistakes them for options on rerun
            argv += [f"{flag}={text}"] if text.startswith("-") else [flag, text]
    if args.command == "simulate":
        argv += [str(args.x0), str(args.y0)]
    for r in getattr(args, "region", []) or []:
        argv += ["--region", str(r)]
    for t in getattr(args, "trajectory", []) or []:
        argv += ["--trajectory", str(t)]
    if getattr(args, "basin", None):
        argv += ["--basin", str(args.basin)]
    return argv


def _write_manifest(args, out_dir: str, t_start: float) -> None:
    manifest = {
        "command": args.command,
        "config": str(getattr(args, "config", None)) if getattr(args, "config", None) else None,
        "out": str(args.out),
        "argv": _effective_argv(args),
        "tool_version": __version__,
        "wall_time_s": time.perf_counter() - t_start,
    }
    tmp = os.path.join(out_dir, ".manifest.json.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, os.path.join(out_dir, "manifest.json"))


def _cmd_solve(args, out: str) -> int:
    cfg = _load_config(args)
    sol = harmonic_balance_solve(cfg)
    write_solution_csv(sol, os.path.join(out, "solution.csv"))
    write_summary_json(sol, cfg, os.path.join(out, "summary.json"))
    _write_cycle_csv(sol, os.path.join(out, "cycle.csv"))
    print(f"residual_norm = {sol.residual_norm:.3e}  mean = {sol.mean:.12g}")
    return 0


def _write_cycle_csv(sol, path) -> None:
    """Plane orbit of the response ('t,x,y'), one drive period for a single
    frequency, a 30-turn window otherwise."""
    from .qpsolve import eval_many

    pos = np.abs(sol.freqs[np.abs(sol.freqs) > 1e-12])
    if len(pos) == 0:
        ts = np.linspace(0.0, 1.0, 2)
    else:
        base = 2.0 * np.pi / float(pos.min())
        span = base if sol.lattice.dim == 1 else 30.0 * base
        ts = np.linspace(0.0, span, 512 if sol.lattice.dim == 1 else 4096)
    x, xd = eval_many(sol, ts)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,x,y\n")
        for t, a, b in zip(ts, x, xd):
            fh.write(f"{t:.17g},{a:.17g},{b:.17g}\n")


def _odd_core(cfg):
    sol = harmonic_balance_solve(cfg)
    alpha = equilibrium(cfg.g, cfg.forcing.f0)
    rb = attract.stiffness_ratio_bounds(cfg.g, sol, alpha)
    env = attract.friction_envelope(cfg, sol, alpha, rb)
    core = attract.build_core(cfg.g, alpha, env, rb, cfg.gamma)
    return sol, alpha, rb, env, core


def _cmd_verify(args, out: str) -> int:
    cfg = _load_config(args)
    which = args.which
    if which == "hexagon":
        cfg_requires_even(cfg)
        p = cfg.g.p
        bounds = estimate_forcing_bounds(cfg.forcing, cfg.freq, p)
        hexa = invariants.build_hexagon(p, bounds.f_pow, bounds.F_pow, cfg.gamma)
        spec = hexa.region_spec()
        report = regions.verify_inward_flux(spec, cfg, bounds, n_boundary=1000, n_times=100)
        regions.write_region_json(spec, os.path.join(out, "hexagon.json"))
        regions.write_region_polylines(spec, out)
    elif which == "S":
        cfg_requires_odd(cfg)
        sol, alpha, rb, env, core = _odd_core(cfg)
        report = attract.verify_core_flux(cfg, sol, core, alpha)
        attract.write_polyline_csv(core.boundary, os.path.join(out, "core_boundary.csv"))
    elif which == "blowup":
        cfg_requires_even(cfg)
        p = cfg.g.p
        bounds = estimate_forcing_bounds(cfg.forcing, cfg.freq, p)
        xi = invariants.blowup_barrier_root(p, bounds.f_pow, bounds.F_pow, cfg.gamma)
        x0 = args.x0 if args.x0 is not None else 1.15 * xi
        if x0 < xi:
            raise ValueError(f"anchor x0 = {x0:g} is below the barrier root {xi:g}")
        reg = invariants.build_blowup_region(p, bounds.f_pow, bounds.F_pow, cfg.gamma, x0)
        spec = reg.region_spec()
        wedge = reg.wedge_region_spec()
        rep1 = regions.verify_inward_flux(spec, cfg, bounds, n_boundary=1000, n_times=100)
        rep2 = regions.verify_inward_flux(wedge, cfg, bounds, n_boundary=1000, n_times=100)
        report = {
            "check": "blowup_sets",
            "pass": rep1["pass"] and rep2["pass"],
            "worst_margin": min(rep1["worst_margin"], rep2["worst_margin"]),
            "samples": rep1["samples"] + rep2["samples"],
            "subset": rep1,
            "wedge": rep2,
            "params": spec.params,
        }
        regions.write_region_json(spec, os.path.join(out, "blowup_set.json"))
        regions.write_region_polylines(spec, out)
        regions.write_region_json(wedge, os.path.join(out, "blowup_wedge.json"))
        regions.write_region_polylines(wedge, out)
    elif which == "sandwich":
        cfg_requires_odd(cfg)
        sol, alpha, rb, env, core = _odd_core(cfg)
        report = attract.verify_restoring_envelope(cfg, sol, core)
    else:  # quadrants
        cfg_requires_odd(cfg)
        sol = harmonic_balance_solve(cfg)
        ics = [(1.0, 5.0), (1.0, 0.0), (2.0, 3.0), (0.5, 1.0), (-1.0, -5.0), (-2.0, 0.0), (-0.5, -1.0)]
        report = attract.quadrant_transit_check(cfg, sol, ics)

    attract.write_report_json(report, os.path.join(out, f"verify_{which}.json"))
    print(f"{report['check']}: {'pass' if report['pass'] else 'FAIL'} "
          f"(worst margin {report['worst_margin']:.3e}, {report['samples']} samples)")
    return 0 if report["pass"] else 2


def cfg_requires_odd(cfg: SystemConfig) -> None:
    if cfg.g.kind != "odd":
        raise ConfigError("this verifier needs the odd-monomial nonlinearity")


def cfg_requires_even(cfg: SystemConfig) -> None:
    if cfg.g.kind != "even":
        raise ConfigError("this verifier needs the even-monomial nonlinearity")


def _parse_grid(text: str) -> basin_mod.GridSpec:
    try:
        xs, ys = text.split(",")
        x0, x1, nx = xs.split(":")
        y0, y1, ny = ys.split(":")
        return basin_mod.GridSpec((float(x0), float(x1)), (float(y0), float(y1)), int(nx), int(ny))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f'bad --grid {text!r}; expected "x0:x1:nx,y0:y1:ny"') from exc


def _cmd_basin(args, out: str) -> int:
    cfg = _load_config(args)
    grid = _parse_grid(args.grid)
    sol = harmonic_balance_solve(cfg)
    budget = basin_mod.ClassifyBudget(t_max=args.tmax)
    bmap = basin_mod.sweep(cfg, sol, grid, budget, workers=args.workers)
    basin_mod.write_basin_csv(bmap, os.path.join(out, "basin.csv"))
    basin_mod.write_basin_matrix(bmap, os.path.join(out, "basin_matrix.txt"))
    print("basin counts:", bmap.counts())
    return 0


def _cmd_simulate(args, out: str) -> int:
    cfg = _load_config(args)
    traj = integrate(cfg, PhaseState(args.x0, args.y0, 0.0), IntegratorSettings(t_max=args.tmax))
    write_trajectory_csv(traj, os.path.join(out, "trajectory.csv"))
    write_events_csv(traj, os.path.join(out, "events.csv"))
    print(f"outcome: {traj.outcome.kind} at t = {traj.outcome.t:g} ({len(traj.ts)} samples)")
    return 0


def _cmd_plot(args, out: str) -> int:
    if not (args.region or args.trajectory or args.basin):
        raise ConfigError("plot needs at least one --region/--trajectory/--basin input")
    overlay = SvgOverlay()
    if args.basin:
        xs, ys, labels, _ = basin_mod.read_basin_csv(args.basin)
        overlay.add_basin(xs, ys, labels)
    for rpath in args.region:
        with open(rpath, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        kind = doc["kind"]
        pattern = os.path.join(os.path.dirname(os.path.abspath(rpath)), f"{kind}_arc*.csv")
        pts = []
        for arc_csv in sorted(glob.glob(pattern)):
            data = np.loadtxt(arc_csv, delimiter=",", skiprows=1, ndmin=2)
            pts.append(data)
        if not pts:
            raise ConfigError(f"no arc polylines found next to {rpath}")
        overlay.add_region(np.vstack(pts), kind)
    for tpath in args.trajectory:
        data = np.loadtxt(tpath, delimiter=",", skiprows=1, ndmin=2)
        overlay.add_curve(data[:, 1], data[:, 2], os.path.basename(tpath))
    path = os.path.join(out, "plot.svg")
    overlay.write(path)
    print(f"wrote {path}")
    return 0


_DISPATCH = {
    "solve": _cmd_solve,
    "verify": _cmd_verify,
    "basin": _cmd_basin,
    "simulate": _cmd_simulate,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    t_start = time.perf_counter()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    out = str(args.out)
    os.makedirs(out, exist_ok=True)
    try:
        code = _DISPATCH[args.command](args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except QattractError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        _write_manifest(args, out, t_start)
        return 2
    _write_manifest(args, out, t_start)
    return code


if __name__ == "__main__":
    sys.exit(main())
