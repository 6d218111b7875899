"""Grid classification of initial conditions: attracted to the
quasi-periodic response, blown up, or undecided within budget.

Labels are decided per point by a single compiled integration loop; grid
points are independent, so sweeps parallelize over threads (the kernels
release the GIL) with bit-identical output for any worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import PhaseState, SystemConfig
from .qpsolve import FourierSolution
from .regions import RegionSpec

__all__ = [
    "ATTRACTED",
    "BLOWN_UP",
    "UNDECIDED",
    "LABEL_NAMES",
    "GridSpec",
    "ClassifyBudget",
    "BasinMap",
    "classify_point",
    "sweep",
    "containment_check",
    "write_basin_csv",
    "write_basin_matrix",
    "read_basin_csv",
]

ATTRACTED = _kernels.ATTRACTED
BLOWN_UP = _kernels.BLOWN_UP
UNDECIDED = _kernels.UNDECIDED
LABEL_NAMES = {ATTRACTED: "attracted", BLOWN_UP: "blown_up", UNDECIDED: "undecided"}
_LABEL_CHARS = {ATTRACTED: "A", BLOWN_UP: "B", UNDECIDED: "U"}


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid of initial conditions, all launched at the same
    forcing phase (basins of nonautonomous systems are phase-dependent)."""

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    nx: int
    ny: int
    t_phase: float = 0.0

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("need nx, ny >= 2")
        if not (self.x_range[1] > self.x_range[0] and self.y_range[1] > self.y_range[0]):
            raise ValueError("ranges must be nondegenerate")

    def xs(self) -> np.ndarray:
        return np.linspace(self.x_range[0], self.x_range[1], self.nx)

    def ys(self) -> np.ndarray:
        return np.linspace(self.y_range[0], self.y_range[1], self.ny)


@dataclass(frozen=True)
class ClassifyBudget:
    """Integration budget for one classification.

    ``window`` defaults to one full drive period for a single frequency
    and to 10 time units otherwise; attraction requires the synchronized
    distance to stay below ``dist_tol`` over one whole window."""

    t_max: float
    dist_tol: float = 1e-6
    window: float | None = None
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    escape_radius: float = 1e6
    min_step: float = 1e-13


def _window_for(cfg: SystemConfig, budget: ClassifyBudget) -> float:
    if budget.window is not None:
        return budget.window
    if cfg.freq.dim == 1:
        return 2.0 * math.pi / sum(abs(w) for w in cfg.freq.omega)
    return 10.0


def classify_point(
    cfg: SystemConfig,
    sol: FourierSolution,
    s0: PhaseState,
    budget: ClassifyBudget,
) -> tuple[str, float]:
    """Label one initial condition and report the decision time."""
    window = _window_for(cfg, budget)
    gamma, gk, gp, gc, ff, fre, fim = cfg.kernel_args()
    sf, sre, sim = sol.as_arrays()
    label, t = _kernels.classify_loop(
        gamma, gk, gp, gc, ff, fre, fim, sf, sre, sim,
        s0.x, s0.y, s0.t,
        s0.t + budget.t_max, budget.rel_tol, budget.abs_tol,
        min(0.25, window / 10.0), budget.min_step, budget.escape_radius,
        budget.dist_tol, window,
    )
    return LABEL_NAMES[int(label)], float(t)


@dataclass
class BasinMap:
    """Labels and decision times over a grid (row i = y index, column j =
    x index)."""

    grid: GridSpec
    labels: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        if self.labels.shape != (self.grid.ny, self.grid.nx):
            raise ValueError("label matrix does not match the grid")
        if self.times.shape != self.labels.shape:
            raise ValueError("time matrix does not match the grid")

    def counts(self) -> dict:
        return {name: int(np.count_nonzero(self.labels == code)) for code, name in LABEL_NAMES.items()}


def sweep(
    cfg: SystemConfig,
    sol: FourierSolution,
    grid: GridSpec,
    budget: ClassifyBudget,
    workers: int | None = None,
) -> BasinMap:
    """Classify the whole grid.  Deterministic for any worker count."""
    window = _window_for(cfg, budget)
    gamma, gk, gp, gc, ff, fre, fim = cfg.kernel_args()
    sf, sre, sim = sol.as_arrays()
    xs, ys = grid.xs(), grid.ys()
    labels = np.empty((grid.ny, grid.nx), dtype=np.int8)
    times = np.empty((grid.ny, grid.nx), dtype=np.float64)
    max_step = min(0.25, window / 10.0)

    def do_row(i):
        y0 = float(ys[i])
        for j in range(grid.nx):
            lab, t = _kernels.classify_loop(
                gamma, gk, gp, gc, ff, fre, fim, sf, sre, sim,
                float(xs[j]), y0, grid.t_phase,
                grid.t_phase + budget.t_max, budget.rel_tol, budget.abs_tol,
                max_step, budget.min_step, budget.escape_radius,
                budget.dist_tol, window,
            )
            labels[i, j] = lab
            times[i, j] = t

    n_workers = workers or os.cpu_count() or 1
    if n_workers <= 1 or not _kernels.NUMBA_ENABLED:
        for i in range(grid.ny):
            do_row(i)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(do_row, range(grid.ny)))
    return BasinMap(grid=grid, labels=labels, times=times)


def containment_check(bmap: BasinMap, region: RegionSpec) -> dict:
    """Fraction of decided grid points inside the region that are
    attracted; pass iff that fraction is one.  Undecided points are
    reported separately; an empty intersection is a flagged vacuous
    pass."""
    xs, ys = bmap.grid.xs(), bmap.grid.ys()
    inside_counts = {code: 0 for code in LABEL_NAMES}
    n_inside = 0
    for i, y in enumerate(ys):
        for j, x in enumerate(xs):
            if region.contains(float(x), float(y)):
                n_inside += 1
                inside_counts[int(bmap.labels[i, j])] += 1
    rx0, rx1, ry0, ry1 = region.bounding_box()
    clipped = (
        rx0 < bmap.grid.x_range[0] - 1e-12
        or rx1 > bmap.grid.x_range[1] + 1e-12
        or ry0 < bmap.grid.y_range[0] - 1e-12
        or ry1 > bmap.grid.y_range[1] + 1e-12
    )
    decided = inside_counts[ATTRACTED] + inside_counts[BLOWN_UP]
    vacuous = n_inside == 0
    if vacuous:
        passed, fraction = True, math.nan
    elif decided == 0:
        passed, fraction = False, math.nan
    else:
        fraction = inside_counts[ATTRACTED] / decided
        passed = fraction == 1.0
    return {
        "check": f"containment:{region.kind}",
        "pass": bool(passed),
        "worst_margin": float(fraction) if not math.isnan(fraction) else None,
        "samples": n_inside,
        "attracted": inside_counts[ATTRACTED],
        "blown_up": inside_counts[BLOWN_UP],
        "undecided": inside_counts[UNDECIDED],
        "vacuous": vacuous,
        "clipped": clipped,
        "params": dict(bmap.grid.__dict__, region=region.kind),
    }


def write_basin_csv(bmap: BasinMap, path) -> None:
    xs, ys = bmap.grid.xs(), bmap.grid.ys()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x0,y0,label,t_decide\n")
        for i, y in enumerate(ys):
            for j, x in enumerate(xs):
                fh.write(
                    f"{x:.17g},{y:.17g},{LABEL_NAMES[int(bmap.labels[i, j])]},{bmap.times[i, j]:.17g}\n"
                )


def write_basin_matrix(bmap: BasinMap, path) -> None:
    """Text matrix: one character per point (A/B/U), one row per y value,
    top row = largest y."""
    g = bmap.grid
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"# nx={g.nx} ny={g.ny} x={g.x_range[0]:.17g}:{g.x_range[1]:.17g} "
            f"y={g.y_range[0]:.17g}:{g.y_range[1]:.17g} t_phase={g.t_phase:.17g}\n"
        )
        for i in range(g.ny - 1, -1, -1):
            fh.write("".join(_LABEL_CHARS[int(v)] for v in bmap.labels[i]) + "\n")


def read_basin_csv(path):
    """(x, y, label_name, t) columns of an exported basin CSV."""
    xs, ys, labels, ts = [], [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if header.strip() != "x0,y0,label,t_decide":
            raise ValueError("not a basin CSV")
        for line in fh:
            a, b, lab, t = line.strip().split(",")
            xs.append(float(a))
            ys.append(float(b))
            labels.append(lab)
            ts.append(float(t))
    return np.array(xs), np.array(ys), labels, np.array(ts)
