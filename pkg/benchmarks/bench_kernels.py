#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Runs the same three workloads (plain integration, basin classification,
hexagon confinement) in two subprocesses, one with numba enabled and one
with QATTRACT_PURE_PYTHON=1, checks that the results agree bitwise, and
reports the timings.

Usage: python benchmarks/bench_kernels.py [--reps 5]
"""

import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json, os, time
import numpy as np
from qattract import _kernels
from qattract.model import ForcingSpectrum, FrequencyVector, Nonlinearity, SystemConfig
from qattract.qpsolve import harmonic_balance_solve
from qattract.integrate import IntegratorSettings, PhaseState, integrate
from qattract.invariants import build_hexagon, stay_in_hexagon
from qattract.basin import ClassifyBudget, classify_point

reps = int(os.environ.get("BENCH_REPS", "3"))
scale = float(os.environ.get("BENCH_SCALE", "1.0"))

freq = FrequencyVector((1.0,))
forcing = ForcingSpectrum.from_modes(1, {(0,): 2.5, (1,): -0.75j, (-1,): 0.75j})
cfg = SystemConfig(forcing=forcing, freq=freq, g=Nonlinearity.even_monomial(1), gamma=9.0)
sol = harmonic_balance_solve(cfg)
hexa = build_hexagon(1, 1.0, 2.0, 9.0)
_kernels.warm_up()

out = {"numba": _kernels.NUMBA_ENABLED, "results": {}, "times": {}}

t0 = time.perf_counter()
traj = None
for _ in range(reps):
    traj = integrate(cfg, PhaseState(0.0, 2.0, 0.0), IntegratorSettings(t_max=20.0 * scale))
out["times"]["integrate"] = (time.perf_counter() - t0) / reps
out["results"]["integrate"] = [traj.xs[-1], traj.ys[-1], len(traj.ts)]

t0 = time.perf_counter()
lab = None
for _ in range(reps):
    lab = classify_point(cfg, sol, PhaseState(0.5, 1.0, 0.0), ClassifyBudget(t_max=50.0 * scale))
out["times"]["classify"] = (time.perf_counter() - t0) / reps
out["results"]["classify"] = list(lab)

t0 = time.perf_counter()
stay = None
for _ in range(reps):
    stay = stay_in_hexagon(cfg, hexa, (0.5, 1.0, 0.0), t_max=20.0 * scale)
out["times"]["hexagon_stay"] = (time.perf_counter() - t0) / reps
out["results"]["hexagon_stay"] = [stay[0], stay[1]]

print(json.dumps(out))
"""


def run(pure: bool, reps: int, scale: float) -> dict:
    env = dict(os.environ)
    env["BENCH_REPS"] = str(reps)
    env["BENCH_SCALE"] = str(scale)
    if pure:
        env["QATTRACT_PURE_PYTHON"] = "1"
    else:
        env.pop("QATTRACT_PURE_PYTHON", None)
    proc = subprocess.run([sys.executable, "-c", _WORKER], env=env, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(proc.stderr)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--pure-scale", type=float, default=0.1,
                    help="workload shrink factor for the pure run (it is slow)")
    args = ap.parse_args()

    fast = run(False, args.reps, 1.0)
    slow = run(True, 1, args.pure_scale)
    if not fast["numba"]:
        print("warning: numba unavailable; comparing fallback against itself")

    fast_small = run(False, args.reps, args.pure_scale)
    print(f"{'workload':<14} {'numba [s]':>12} {'pure [s]':>12} {'speedup':>9}  identical")
    for key in fast["times"]:
        tn = fast_small["times"][key]
        tp = slow["times"][key]
        same = fast_small["results"][key] == slow["results"][key]
        print(f"{key:<14} {tn:>12.6f} {tp:>12.6f} {tp / tn:>8.1f}x  {same}")
    print("\nfull-size numba timings:", json.dumps(fast["times"], indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
