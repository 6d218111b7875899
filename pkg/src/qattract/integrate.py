"""Adaptive explicit Runge-Kutta integration of the planar system with
dense output, axis-crossing and region events, and blow-up detection.

The stepper is a Dormand-Prince 5(4) pair; every accepted step also
yields the standard quartic interpolant, which events are located on by
bisection followed by one Newton correction against the true field.
Escape beyond a large radius and collapse of the step size are both
reported as outcomes, never exceptions: they are the integrator's
blow-up evidence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import MissingEvent
from .model import PhaseState, SystemConfig

__all__ = [
    "IntegratorSettings",
    "Outcome",
    "EventSpec",
    "Trajectory",
    "integrate",
    "integrate_error",
    "crossing_sequence",
    "write_trajectory_csv",
    "write_events_csv",
]

_TIME_LOCATE_TOL = 1e-12


@dataclass(frozen=True)
class IntegratorSettings:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float = 1.0
    t_max: float = 100.0
    escape_radius: float = 1e6
    min_step: float = 1e-13

    def __post_init__(self):
        if not (0.0 < self.min_step < self.max_step):
            raise ValueError("need 0 < min_step < max_step")
        if self.rel_tol <= 0.0 or self.abs_tol <= 0.0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class Outcome:
    """How an integration ended: 'completed', 'escaped' or 'step_collapse'
    (the latter two are treated as numerical blow-up evidence)."""

    kind: str
    t: float

    @property
    def is_blowup(self) -> bool:
        return self.kind in ("escaped", "step_collapse")


_OUTCOME_KINDS = {
    _kernels.COMPLETED: "completed",
    _kernels.ESCAPED: "escaped",
    _kernels.STEP_COLLAPSE: "step_collapse",
}


@dataclass(frozen=True)
class EventSpec:
    """Axis-crossing or region-boundary event to locate along a run.

    ``cross_y_axis`` watches the first coordinate through zero (the
    trajectory crossing the vertical axis), ``cross_x_axis`` the second.
    ``direction`` refers to the watched coordinate increasing ('up'),
    decreasing ('down') or either.  Region events need an object with a
    ``contains(x, y) -> bool`` method and a ``kind`` attribute.
    """

    kind: str
    direction: str = "any"
    region: Optional[object] = None

    def __post_init__(self):
        if self.kind not in ("cross_y_axis", "cross_x_axis", "enter_region", "exit_region"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.direction not in ("up", "down", "any"):
            raise ValueError("direction must be 'up', 'down' or 'any'")
        if self.kind in ("enter_region", "exit_region") and self.region is None:
            raise ValueError("region events need a region")

    @property
    def tag(self) -> str:
        if self.region is not None:
            return f"{self.kind}:{getattr(self.region, 'kind', 'region')}"
        return f"{self.kind}:{self.direction}"


@dataclass
class Trajectory:
    """Accepted-step samples plus located events.

    ``ts``/``xs``/``ys`` are aligned arrays; ``dense[i]`` holds the
    quartic interpolant of the step from ``ts[i]`` to ``ts[i+1]`` (scaled
    increments, see :meth:`state_at`).  Events are (tag, PhaseState)
    sorted by time.
    """

    ts: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    dense: Optional[np.ndarray]
    events: list
    outcome: Outcome
    registered: tuple

    def __post_init__(self):
        if np.any(np.diff(self.ts) <= 0.0):
            raise ValueError("sample times must be strictly increasing")
        for _, s in self.events:
            if not (self.ts[0] <= s.t <= self.ts[-1]):
                raise ValueError("event outside the sample span")

    @property
    def samples(self) -> list[PhaseState]:
        return [PhaseState(float(x), float(y), float(t)) for t, x, y in zip(self.ts, self.xs, self.ys)]

    @property
    def final_state(self) -> PhaseState:
        return PhaseState(float(self.xs[-1]), float(self.ys[-1]), float(self.ts[-1]))

    def _interp(self, i: int, sigma: float) -> tuple[float, float]:
        q = self.dense[i]
        x = self.xs[i] + sigma * (q[0, 0] + sigma * (q[0, 1] + sigma * (q[0, 2] + sigma * q[0, 3])))
        y = self.ys[i] + sigma * (q[1, 0] + sigma * (q[1, 1] + sigma * (q[1, 2] + sigma * q[1, 3])))
        return x, y

    def state_at(self, t: float) -> PhaseState:
        """Dense-output state at any time within the sample span."""
        if self.dense is None:
            raise ValueError("trajectory was produced without dense output")
        if not (self.ts[0] <= t <= self.ts[-1]):
            raise ValueError("time outside the sample span")
        i = int(np.searchsorted(self.ts, t, side="right") - 1)
        i = min(max(i, 0), len(self.ts) - 2)
        h = self.ts[i + 1] - self.ts[i]
        x, y = self._interp(i, (t - self.ts[i]) / h)
        return PhaseState(float(x), float(y), float(t))


def _run_loop(mode, kernel_args, s0, settings, want_dense):
    gamma, gk, gp, gc, freqs, re, im = kernel_args
    ts, xs, ys, dense, n, code, t_out = _kernels.integrate_loop(
        mode,
        gamma,
        gk,
        gp,
        gc,
        freqs,
        re,
        im,
        s0.x,
        s0.y,
        s0.t,
        settings.t_max,
        settings.rel_tol,
        settings.abs_tol,
        settings.max_step,
        settings.min_step,
        settings.escape_radius,
        want_dense,
    )
    ts = np.array(ts[:n])
    xs = np.array(xs[:n])
    ys = np.array(ys[:n])
    dense = np.array(dense[: n - 1]) if want_dense and n > 1 else None
    return ts, xs, ys, dense, Outcome(_OUTCOME_KINDS[int(code)], float(t_out))


def _locate_scalar(traj_arrays, dense, i, comp, field_fn):
    """Bisect the step interpolant for a zero of the watched coordinate,
    then apply one Newton correction using the true field."""
    ts, xs, ys = traj_arrays
    h = ts[i + 1] - ts[i]
    q = dense[i]
    base = (xs[i], ys[i])

    def value(sigma):
        c = q[comp]
        return base[comp] + sigma * (c[0] + sigma * (c[1] + sigma * (c[2] + sigma * c[3])))

    lo, hi = 0.0, 1.0
    flo = value(lo)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm = value(mid)
        if flo * fm <= 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
        if h * (hi - lo) <= _TIME_LOCATE_TOL:
            break
    sigma = 0.5 * (lo + hi)

    def interp(sig):
        x = base[0] + sig * (q[0, 0] + sig * (q[0, 1] + sig * (q[0, 2] + sig * q[0, 3])))
        y = base[1] + sig * (q[1, 0] + sig * (q[1, 1] + sig * (q[1, 2] + sig * q[1, 3])))
        return x, y

    x, y = interp(sigma)
    t = ts[i] + sigma * h
    dx, dy = field_fn(x, y, t)
    deriv = (dx, dy)[comp]
    val = (x, y)[comp]
    if deriv != 0.0:
        t_corr = t - val / deriv
        if ts[i] <= t_corr <= ts[i + 1]:
            sigma = (t_corr - ts[i]) / h
            x, y = interp(sigma)
            t = t_corr
    return PhaseState(float(x), float(y), float(t))


def _locate_membership(traj_arrays, dense, i, contains):
    ts, xs, ys = traj_arrays
    h = ts[i + 1] - ts[i]
    q = dense[i]

    def interp(sig):
        x = xs[i] + sig * (q[0, 0] + sig * (q[0, 1] + sig * (q[0, 2] + sig * q[0, 3])))
        y = ys[i] + sig * (q[1, 0] + sig * (q[1, 1] + sig * (q[1, 2] + sig * q[1, 3])))
        return x, y

    lo, hi = 0.0, 1.0
    inside_lo = contains(xs[i], ys[i])
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if contains(*interp(mid)) == inside_lo:
            lo = mid
        else:
            hi = mid
        if h * (hi - lo) <= _TIME_LOCATE_TOL:
            break
    sigma = hi
    x, y = interp(sigma)
    return PhaseState(float(x), float(y), float(ts[i] + sigma * h))


def _collect_events(arrays, dense, events, field_fn):
    ts, xs, ys = arrays
    found = []
    if dense is None or len(ts) < 2:
        return found
    for spec in events:
        if spec.kind in ("cross_y_axis", "cross_x_axis"):
            comp = 0 if spec.kind == "cross_y_axis" else 1
            w = xs if comp == 0 else ys
            for i in range(len(ts) - 1):
                a, b = w[i], w[i + 1]
                if a == 0.0 or a * b >= 0.0:
                    continue
                going_up = b > a
                if spec.direction == "up" and not going_up:
                    continue
                if spec.direction == "down" and going_up:
                    continue
                found.append((spec.tag, _locate_scalar(arrays, dense, i, comp, field_fn)))
        else:
            contains = spec.region.contains
            inside = [bool(contains(float(x), float(y))) for x, y in zip(xs, ys)]
            for i in range(len(ts) - 1):
                if inside[i] == inside[i + 1]:
                    continue
                entering = inside[i + 1]
                if spec.kind == "enter_region" and not entering:
                    continue
                if spec.kind == "exit_region" and entering:
                    continue
                found.append((spec.tag, _locate_membership(arrays, dense, i, contains)))
    found.sort(key=lambda ev: ev[1].t)
    return found


def integrate(
    cfg: SystemConfig,
    s0: PhaseState,
    settings: IntegratorSettings = IntegratorSettings(),
    events: Sequence[EventSpec] = (),
) -> Trajectory:
    """Integrate the forced oscillator from ``s0`` until ``t_max``, escape,
    or step collapse.  Identical inputs give bit-identical trajectories."""
    kargs = cfg.kernel_args()
    want_dense = True
    ts, xs, ys, dense, outcome = _run_loop(0, kargs, s0, settings, want_dense)

    gamma, gk, gp, gc, freqs, re, im = kargs

    def field_fn(x, y, t):
        return _kernels.field(0, gamma, gk, gp, gc, freqs, re, im, x, y, t)

    evs = _collect_events((ts, xs, ys), dense, events, field_fn)
    return Trajectory(ts, xs, ys, dense, evs, outcome, tuple(events))


def integrate_error(
    cfg: SystemConfig,
    sol_arrays,
    e0: PhaseState,
    settings: IntegratorSettings = IntegratorSettings(),
    events: Sequence[EventSpec] = (),
) -> Trajectory:
    """Integrate the deviation system around a spectral solution.

    ``sol_arrays`` is the (freqs, re, im) triple of the reference solution
    (see ``FourierSolution.as_arrays``); the state is (deviation,
    deviation velocity)."""
    gamma, gk, gp, gc, _, _, _ = cfg.kernel_args()
    freqs, re, im = sol_arrays
    kargs = (gamma, gk, gp, gc, freqs, re, im)
    ts, xs, ys, dense, outcome = _run_loop(1, kargs, e0, settings, True)

    def field_fn(x, y, t):
        return _kernels.field(1, gamma, gk, gp, gc, freqs, re, im, x, y, t)

    evs = _collect_events((ts, xs, ys), dense, events, field_fn)
    return Trajectory(ts, xs, ys, dense, evs, outcome, tuple(events))


def crossing_sequence(traj: Trajectory, spec: EventSpec) -> list[PhaseState]:
    """Ordered states of one registered crossing event."""
    if spec.tag not in {s.tag for s in traj.registered}:
        raise MissingEvent(f"event {spec.tag!r} was not registered with this trajectory")
    return [s for tag, s in traj.events if tag == spec.tag]


def write_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,x,y\n")
        for t, x, y in zip(traj.ts, traj.xs, traj.ys):
            fh.write(f"{t:.17g},{x:.17g},{y:.17g}\n")


def write_events_csv(traj: Trajectory, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("tag,t,x,y\n")
        for tag, s in traj.events:
            fh.write(f"{tag},{s.t:.17g},{s.x:.17g},{s.y:.17g}\n")
