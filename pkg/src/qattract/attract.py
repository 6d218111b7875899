"""Numeric instrumentation of the odd-case attraction machinery.

Everything here measures, on the deviation system
``xi'' + gamma xi' + xi * D(xi, x0(t)) = 0`` around the spectral solution
``x0``, the quantities the global-attraction argument is built from: the
bounded stiffness ratio, the damping envelope and the derived attracting
core, the restoring-term pinch outside the core, quadrant transit, and
the per-cycle shrinking of axis crossings.  These are measurements, not
proofs: every verifier returns a report.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDenominator, GammaTooSmall, SolutionSignChange
from .integrate import EventSpec, IntegratorSettings, integrate_error
from .model import Nonlinearity, PhaseState, SystemConfig
from .qpsolve import FourierSolution, eval_many

__all__ = [
    "ErrorState",
    "StiffnessBounds",
    "FrictionEnvelope",
    "AttractingCore",
    "difference_quotient",
    "stiffness_ratio",
    "stiffness_ratio_bounds",
    "friction_envelope",
    "build_core",
    "core_v_intercepts",
    "upper_guard_curve",
    "lower_guard_curve",
    "verify_core_flux",
    "verify_restoring_envelope",
    "quadrant_transit_check",
    "cycle_decrement",
    "liouville_clock",
    "write_report_json",
    "write_polyline_csv",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ErrorState:
    """Deviation-plane state: xi = x - x0(t) and its velocity."""

    xi: float
    y: float
    t: float = 0.0

    def as_phase(self) -> PhaseState:
        return PhaseState(self.xi, self.y, self.t)


# --- secant slope of g and its partial derivatives, vectorized ------------


def _mono_terms(q: int):
    c = 1.0
    for j in range(q):
        yield j, q - 1 - j, c
        c = c * (q - j) / (j + 1.0)


def _poly_terms(g: Nonlinearity):
    if g.kind == "odd":
        yield 1.0, 2 * g.p + 1
    elif g.kind == "even":
        yield 1.0, 2 * g.p
    else:
        for j, a in enumerate(g.coeffs, start=1):
            if a != 0.0:
                yield a, j


def F_val(g: Nonlinearity, xi, x):
    """(g(x+xi) - g(x))/xi via the cancellation-free expansion; exact
    g'(x) at xi = 0."""
    xi = np.asarray(xi, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros(np.broadcast(xi, x).shape)
    for a, q in _poly_terms(g):
        for j, e, c in _mono_terms(q):
            out = out + a * c * x**j * xi**e
    return out


def F_dxi(g: Nonlinearity, xi, x):
    xi = np.asarray(xi, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros(np.broadcast(xi, x).shape)
    for a, q in _poly_terms(g):
        for j, e, c in _mono_terms(q):
            if e >= 1:
                out = out + a * c * e * x**j * xi ** (e - 1)
    return out


def F_dx(g: Nonlinearity, xi, x):
    xi = np.asarray(xi, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros(np.broadcast(xi, x).shape)
    for a, q in _poly_terms(g):
        for j, e, c in _mono_terms(q):
            if j >= 1:
                out = out + a * c * j * x ** (j - 1) * xi**e
    return out


def difference_quotient(g: Nonlinearity, xi: float, x: float) -> float:
    """Scalar secant slope of the restoring force."""
    return float(F_val(g, xi, x))


def stiffness_ratio(g: Nonlinearity, sol: FourierSolution, alpha: float, xi: float, t: float) -> float:
    """Ratio of the secant slope along the solution to the slope at the
    equilibrium; the time reparameterization that freezes the deviation
    dynamics is driven by its square root."""
    q = difference_quotient(g, xi, alpha)
    if abs(q) < 1e-14:
        raise DegenerateDenominator(f"secant slope at the equilibrium vanished for xi={xi:g}")
    x0t, _ = eval_many(sol, np.array([t]))
    return float(difference_quotient(g, xi, float(x0t[0])) / q)


def _quasi_random_times(sol: FourierSolution, n: int) -> np.ndarray:
    pos = np.abs(sol.freqs[np.abs(sol.freqs) > 1e-12])
    span = 50.0 * 2.0 * math.pi / float(pos.min()) if len(pos) else 1.0
    j = np.arange(n, dtype=np.float64)
    return span * ((j + 0.5) * _GOLDEN % 1.0)


def _xi_grid(n: int, lo: float = 1e-6, hi: float = 1e6) -> np.ndarray:
    half = np.geomspace(lo, hi, n)
    return np.concatenate([-half[::-1], [0.0], half])


@dataclass(frozen=True)
class StiffnessBounds:
    """Two-sided bracket of the stiffness ratio, widened by 1% so freshly
    sampled ratios stay strictly inside."""

    lo: float
    hi: float
    sample_count: int

    def __post_init__(self):
        if not (0.0 < self.lo <= self.hi):
            raise ValueError("bounds must satisfy 0 < lo <= hi")


def stiffness_ratio_bounds(
    g: Nonlinearity,
    sol: FourierSolution,
    alpha: float,
    n_xi: int = 400,
    n_times: int = 1000,
) -> StiffnessBounds:
    """Extremes of the stiffness ratio over a log grid of deviations and
    quasi-random times.  Rejects solutions without a definite sign, which
    the odd-case bracket requires."""
    ts = _quasi_random_times(sol, n_times)
    x0, _ = eval_many(sol, ts)
    if x0.min() <= 0.0 < x0.max() or (x0.max() < 0.0 and alpha > 0.0):
        raise SolutionSignChange("spectral solution changes sign on the sample")
    xi = _xi_grid(n_xi)[:, None]
    ratios = F_val(g, xi, x0[None, :]) / F_val(g, xi, alpha)
    lo = float(ratios.min())
    hi = float(ratios.max())
    if lo <= 0.0:
        raise SolutionSignChange("stiffness ratio lost positivity on the sample")
    return StiffnessBounds(lo=0.99 * lo, hi=1.01 * hi, sample_count=ratios.size)


@dataclass(frozen=True)
class FrictionEnvelope:
    """Affine envelope (b1 + b2 |w|)/gamma dominating the sampled
    logarithmic rate of the stiffness ratio, and the derived velocity cap
    of the attracting core."""

    b1: float
    b2: float
    wtilde: float

    def __post_init__(self):
        assert self.b1 > 0.0 and self.b2 > 0.0


def friction_envelope(
    cfg: SystemConfig,
    sol: FourierSolution,
    alpha: float,
    bounds: StiffnessBounds,
    n_xi: int = 200,
    n_times: int = 200,
) -> FrictionEnvelope:
    """Least-max affine fit dominating gamma * |dR/dt / 2R| against |w|.

    The sampled rate at (xi, t, w) is |A| sqrt(R) |w| + |B| with A the
    deviation-derivative and B the explicit time-derivative of log R / 2;
    both are evaluated exactly from the spectral solution.  The fit is the
    dominating envelope with the smallest worst slack, found by golden
    search on the slope (the objective is the range of intercepts, convex
    piecewise-linear)."""
    gamma = cfg.gamma
    ts = _quasi_random_times(sol, n_times)
    x0, x0d = eval_many(sol, ts)
    xi = _xi_grid(n_xi)[:, None]

    P = F_val(cfg.g, xi, x0[None, :])
    Q = F_val(cfg.g, xi, alpha)
    A = 0.5 * (F_dxi(cfg.g, xi, x0[None, :]) / P - F_dxi(cfg.g, xi, alpha) / Q)
    B = 0.5 * F_dx(cfg.g, xi, x0[None, :]) * x0d[None, :] / P
    R = P / Q

    slopes = (gamma * np.abs(A) * np.sqrt(R)).ravel()
    intercepts = (gamma * np.abs(B)).ravel()
    s_front, c_front = _pareto_front(slopes, intercepts)

    s_max = float(s_front.max())
    c_max = float(c_front.max())
    w_hi = 1.25 * max((gamma**2 - c_max) / max(s_max, 1e-12), 1.0)

    b1 = max(c_max, 1e-12)
    b2 = max(s_max, 1e-12)
    for _ in range(6):
        b1, b2 = _least_max_fit(s_front, c_front, w_hi)
        wtilde = (gamma**2 - b1) / b2
        if wtilde <= w_hi or wtilde <= 0.0:
            break
        w_hi = 1.25 * wtilde
    return FrictionEnvelope(b1=b1, b2=b2, wtilde=wtilde)


def _pareto_front(slopes: np.ndarray, intercepts: np.ndarray):
    """Samples not dominated in both slope and intercept; only these can
    bind the envelope."""
    order = np.argsort(-slopes, kind="stable")
    s, c = slopes[order], intercepts[order]
    keep_s, keep_c = [], []
    best_c = -np.inf
    for si, ci in zip(s, c):
        if ci > best_c:
            keep_s.append(si)
            keep_c.append(ci)
            best_c = ci
    return np.array(keep_s), np.array(keep_c)


def _least_max_fit(s: np.ndarray, c: np.ndarray, w_hi: float):
    """Dominating affine fit (b1, b2) minimizing the worst slack over the
    sampled band [0, w_hi]; ties broken toward the largest slope (which
    keeps b1 near the raw intercept maximum)."""
    end = c + s * w_hi
    c_max = float(c.max())
    c_min = float(c.min())
    end_min = float(end.min())

    cand = np.linspace(0.0, float(s.max()), 2049)[1:]

    def needed_b1(b2):
        return np.maximum(c_max, np.max(c[None, :] + (s[None, :] - b2[:, None]) * w_hi, axis=1))

    b1s = needed_b1(cand)
    over = np.maximum(-c_min, cand * w_hi - end_min)
    psi = b1s + over
    best = float(psi.min())
    ok = np.nonzero(psi <= best + 1e-12 * max(1.0, abs(best)))[0]
    pick = int(ok[-1])
    return max(float(b1s[pick]), 1e-12), max(float(cand[pick]), 1e-12)


# --- the attracting core ---------------------------------------------------


def _q_poly_coeffs(g: Nonlinearity, alpha: float) -> np.ndarray:
    """Ascending coefficients of v -> secant slope at the equilibrium."""
    deg = g.degree - 1
    qc = np.zeros(deg + 1)
    for a, q in _poly_terms(g):
        for j, e, c in _mono_terms(q):
            qc[e] += a * c * alpha**j
    return qc


def _w_potential_coeffs(qc: np.ndarray) -> np.ndarray:
    """Ascending coefficients of the even-ish potential
    W(v) = integral_0^v s Q(s) ds  given Q's coefficients."""
    wc = np.zeros(len(qc) + 2)
    for m, q in enumerate(qc):
        wc[m + 2] = q / (m + 2.0)
    return wc


def _poly_eval(coeffs: np.ndarray, v):
    out = np.zeros_like(np.asarray(v, dtype=np.float64))
    for c in coeffs[::-1]:
        out = out * v + c
    return out


def core_v_intercepts(g: Nonlinearity, alpha: float, wtilde: float) -> tuple[float, float]:
    """Deviation-axis crossings of the level curve at half the squared
    velocity cap (negative side first)."""
    wc = _w_potential_coeffs(_q_poly_coeffs(g, alpha))
    level = 0.5 * wtilde**2

    def solve(sign):
        hi = 1.0
        for _ in range(400):
            if _poly_eval(wc, sign * hi) >= level:
                break
            hi *= 2.0
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if _poly_eval(wc, sign * mid) < level:
                lo = mid
            else:
                hi = mid
        return sign * 0.5 * (lo + hi)

    return solve(-1.0), solve(1.0)


@dataclass(frozen=True)
class AttractingCore:
    """Convex region around the origin of the deviation plane from which
    trajectories are funneled to the solution.

    Realized as the sqrt(lo)-shrunk preimage of the level set at
    ``energy_level`` in the rescaled coordinates; membership is decided by
    the defining inequality, the polyline is for export only."""

    energy_level: float
    boundary: np.ndarray
    y_intercept: float
    xi_intercept: float
    v_minus: float
    wtilde: float
    r_lo: float
    w_coeffs: np.ndarray
    kind: str = "attracting_core"

    def contains(self, xi: float, y: float) -> bool:
        return _poly_eval(self.w_coeffs, xi) + y * y / (2.0 * self.r_lo) <= self.energy_level


def build_core(
    g: Nonlinearity,
    alpha: float,
    envelope: FrictionEnvelope,
    bounds: StiffnessBounds,
    gamma: float,
    n_boundary: int = 720,
) -> AttractingCore:
    """Level-set construction of the attracting core.

    Requires gamma^2 > 2 b1; the velocity cap is scaled by sqrt of the
    stiffness lower bound, the worst case of the coordinate map back to
    the deviation plane."""
    if gamma**2 <= 2.0 * envelope.b1:
        raise GammaTooSmall(f"gamma^2 = {gamma**2:g} <= 2 b1 = {2 * envelope.b1:g}")
    wtilde = envelope.wtilde
    assert wtilde > gamma**2 / (2.0 * envelope.b2)
    wc = _w_potential_coeffs(_q_poly_coeffs(g, alpha))
    v_minus, v_plus = core_v_intercepts(g, alpha, wtilde)
    level = 0.5 * wtilde**2
    root_r1 = math.sqrt(bounds.lo)

    half = n_boundary // 2
    theta = np.linspace(0.0, math.pi, half + 1)
    vmid = 0.5 * (v_plus + v_minus)
    vhalf = 0.5 * (v_plus - v_minus)
    vs = vmid + vhalf * np.cos(theta)
    ws = np.sqrt(np.maximum(2.0 * (level - _poly_eval(wc, vs)), 0.0))
    upper = np.column_stack([vs, root_r1 * ws])
    lower = np.column_stack([vs[::-1][1:], -root_r1 * ws[::-1][1:]])
    boundary = np.vstack([upper, lower, upper[:1]])

    return AttractingCore(
        energy_level=level,
        boundary=boundary,
        y_intercept=root_r1 * wtilde,
        xi_intercept=v_plus,
        v_minus=v_minus,
        wtilde=wtilde,
        r_lo=bounds.lo,
        w_coeffs=wc,
    )


def upper_guard_curve(gamma: float, p: int, xi: float) -> float:
    """Quadrant-II guard below which the deviation velocity still falls:
    -xi^(2p+1)/(4 gamma)."""
    return -(xi ** (2 * p + 1)) / (4.0 * gamma)


def lower_guard_curve(gamma: float, p: int, xi: float) -> float:
    """Quadrant-II guard under which the decay rate is at least half the
    nominal one: -4 xi^(2p+1)/gamma."""
    return -4.0 * xi ** (2 * p + 1) / gamma


# --- verifiers -------------------------------------------------------------


def verify_core_flux(
    cfg: SystemConfig,
    sol: FourierSolution,
    core: AttractingCore,
    alpha: float,
    n_boundary: int = 720,
    n_times: int = 100,
) -> dict:
    """Outward rate of the core's defining level function along the flow.

    The level function carries the time-dependent stiffness ratio, so the
    rate includes its explicit time derivative (the membrane moves); the
    construction makes the rate non-positive everywhere on the boundary,
    which is what funnels core starters to the solution."""
    idx = np.linspace(0, len(core.boundary) - 2, n_boundary).astype(int)
    pts = core.boundary[idx]
    ts = _quasi_random_times(sol, n_times)
    x0, x0d = eval_many(sol, ts)

    xi = pts[:, 0][:, None]
    y = pts[:, 1][:, None]
    P = F_val(cfg.g, xi, x0[None, :])
    Q = F_val(cfg.g, xi, alpha)
    R = P / Q
    A = 0.5 * (F_dxi(cfg.g, xi, x0[None, :]) / P - F_dxi(cfg.g, xi, alpha) / Q)
    B = 0.5 * F_dx(cfg.g, xi, x0[None, :]) * x0d[None, :] / P

    rate = -(y**2 / R) * (cfg.gamma + A * y + B)
    # gradient of the level function, for normalization
    wprime = np.zeros_like(xi)
    for m in range(1, len(core.w_coeffs)):
        wprime = wprime + m * core.w_coeffs[m] * xi ** (m - 1)
    grad = np.hypot(wprime - (y**2 / (2.0 * R**2)) * (2.0 * A * R), y / R)
    normalized = rate / np.maximum(grad, 1e-300)
    worst = float(normalized.max())
    return {
        "check": "core_boundary_flux",
        "pass": bool(worst <= 1e-9),
        "worst_margin": worst,
        "samples": int(normalized.size),
        "params": {"gamma": cfg.gamma, "wtilde": core.wtilde, "r_lo": core.r_lo},
    }


def verify_restoring_envelope(
    cfg: SystemConfig,
    sol: FourierSolution,
    core: AttractingCore,
    n_xi: int = 200,
    n_times: int = 200,
    reach: float = 10.0,
) -> dict:
    """Pinch of the restoring term outside the core:
    0.5 |xi|^(2p+1) <= |xi D(xi, x0(t))| <= 2 |xi|^(2p+1) with the sign of
    xi.  Violations are reported, never raised (small gamma is expected to
    violate)."""
    p = cfg.g.p
    ts = _quasi_random_times(sol, n_times)
    x0, _ = eval_many(sol, ts)
    pos = np.geomspace(core.xi_intercept * (1.0 + 1e-9), reach * core.xi_intercept, n_xi)
    neg = -np.geomspace(-core.v_minus * (1.0 + 1e-9), reach * (-core.v_minus), n_xi)
    xi = np.concatenate([neg, pos])[:, None]
    restoring = xi * F_val(cfg.g, xi, x0[None, :])
    mag = np.abs(xi) ** (2 * p + 1)
    ok_sign = np.sign(restoring) == np.sign(xi)
    lo_margin = np.abs(restoring) - 0.5 * mag
    hi_margin = 2.0 * mag - np.abs(restoring)
    ok = ok_sign & (lo_margin >= 0.0) & (hi_margin >= 0.0)
    return {
        "check": "restoring_envelope",
        "pass": bool(np.all(ok)),
        "worst_margin": float(np.minimum(lo_margin, hi_margin).min()),
        "samples": int(ok.size),
        "violations": int(np.size(ok) - np.count_nonzero(ok)),
        "params": {"gamma": cfg.gamma, "p": p, "reach": reach},
    }


def _transit_settings(t_max: float) -> IntegratorSettings:
    return IntegratorSettings(t_max=t_max, max_step=0.05)


def _kernels_error_field(cfg: SystemConfig, sol_arrays, xi: float, y: float, t: float):
    from . import _kernels

    gamma, gk, gp, gc, _, _, _ = cfg.kernel_args()
    freqs, re, im = sol_arrays
    return _kernels.field(1, gamma, gk, gp, gc, freqs, re, im, xi, y, t)


def quadrant_transit_check(
    cfg: SystemConfig,
    sol: FourierSolution,
    ics,
    t_max: float = 50.0,
    n_floor_times: int = 512,
) -> dict:
    """From deviation quadrant I (III) the flow must reach II (IV) in
    finite time; transit times are recorded and, for strictly interior
    starts, checked against the closed-form dissipation bound."""
    arrays = sol.as_arrays()
    ts_floor = _quasi_random_times(sol, n_floor_times)
    x0, _ = eval_many(sol, ts_floor)
    rows = []
    all_ok = True
    for ic in ics:
        xi0, y0 = float(ic[0]), float(ic[1])
        if xi0 == 0.0:
            raise ValueError("start strictly inside quadrant I or III")
        sign = 1.0 if xi0 > 0.0 else -1.0
        if sign > 0 and y0 < 0.0 or sign < 0 and y0 > 0.0:
            raise ValueError("start must lie in quadrant I (xi>0, y>=0) or III (xi<0, y<=0)")
        floor = float(np.min(np.abs(xi0 * F_val(cfg.g, xi0, x0))))
        bound = math.inf
        if floor > 0.0 and abs(y0) > 0.0:
            bound = math.log1p(cfg.gamma * abs(y0) / floor) / cfg.gamma
        if y0 == 0.0:
            # already on the axis with the restoring term pushing across it
            _, dy = _kernels_error_field(cfg, arrays, xi0, y0, 0.0)
            transit = 0.0 if dy * sign < 0.0 else math.inf
        else:
            direction = "down" if sign > 0 else "up"
            ev = EventSpec("cross_x_axis", direction)
            traj = integrate_error(cfg, arrays, PhaseState(xi0, y0, 0.0), _transit_settings(t_max), [ev])
            hits = [s for tag, s in traj.events if tag == ev.tag]
            transit = hits[0].t if hits else math.inf
        ok = math.isfinite(transit) and transit <= bound * (1.0 + 1e-9) + 1e-9
        all_ok &= ok
        rows.append({"xi0": xi0, "y0": y0, "transit": transit, "bound": bound, "ok": ok})
    worst = max((r["transit"] - r["bound"] for r in rows if math.isfinite(r["bound"])), default=0.0)
    return {
        "check": "quadrant_transit",
        "pass": bool(all_ok),
        "worst_margin": float(worst),
        "samples": len(rows),
        "rows": rows,
        "params": {"gamma": cfg.gamma, "t_max": t_max},
    }


def cycle_decrement(
    cfg: SystemConfig,
    sol: FourierSolution,
    core: AttractingCore,
    y0: float,
    t_max: float = 200.0,
) -> dict:
    """Launch the deviation flow from (0, y0) outside the core and record
    |y| at every re-crossing of the vertical axis until the core is
    entered.

    ``decrements`` are between consecutive crossings (the half-cycle
    shrink the re-crossing argument bounds); ``cycle_decrements`` pairs
    same-direction crossings, i.e. full turns.  A run that never returns
    to the axis is flagged, not raised."""
    if core.contains(0.0, y0):
        raise ValueError("start lies inside the core")
    crossing = EventSpec("cross_y_axis", "any")
    entering = EventSpec("enter_region", region=core)
    traj = integrate_error(
        cfg,
        sol.as_arrays(),
        PhaseState(0.0, y0, 0.0),
        IntegratorSettings(t_max=t_max, max_step=0.05),
        [crossing, entering],
    )
    t_enter = math.inf
    for tag, s in traj.events:
        if tag == entering.tag:
            t_enter = s.t
            break
    speeds = [abs(y0)]
    for tag, s in traj.events:
        if tag == crossing.tag and s.t < t_enter:
            speeds.append(abs(s.y))
    decrements = [speeds[i] - speeds[i + 1] for i in range(len(speeds) - 1)]
    cycle_decrements = [speeds[i] - speeds[i + 2] for i in range(len(speeds) - 2)]
    return {
        "check": "cycle_decrement",
        "pass": bool(all(d > 0.0 for d in decrements)),
        "worst_margin": float(min(decrements)) if decrements else math.inf,
        "samples": len(decrements),
        "entered_core": math.isfinite(t_enter),
        "never_returned": not math.isfinite(t_enter) and not decrements,
        "t_enter": t_enter,
        "decrements": decrements,
        "cycle_decrements": cycle_decrements,
        "params": {"gamma": cfg.gamma, "y0": y0, "t_max": t_max},
    }


def liouville_clock(g: Nonlinearity, sol: FourierSolution, alpha: float, traj) -> np.ndarray:
    """Reparameterized time along a deviation trajectory: the cumulative
    quadrature of sqrt of the stiffness ratio.  Strictly increasing since
    the ratio is positive."""
    x0, _ = eval_many(sol, traj.ts)
    R = F_val(g, traj.xs, x0) / F_val(g, traj.xs, alpha)
    root = np.sqrt(R)
    tau = np.zeros(len(traj.ts))
    tau[1:] = np.cumsum(0.5 * (root[1:] + root[:-1]) * np.diff(traj.ts))
    return tau


def write_report_json(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def write_polyline_csv(points: np.ndarray, path, header: str = "xi,y") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in np.asarray(points):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
