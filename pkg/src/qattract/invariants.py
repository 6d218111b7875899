"""Even-monomial trapping and blow-up constructions.

Three certified set families for ``x'' + gamma x' + x^(2p) = f(omega t)``
with drive range ``f_pow^(2p) <= f <= F_pow^(2p)``:

* the trapping hexagon whose two curved sides ride the frozen-forcing
  nullclines, area growing linearly with the dissipation;
* the frozen-energy level region around the stable equilibrium (p = 1),
  an inner estimate of the basin of attraction whose left crossing sits
  at the square-root-of-epsilon distance from the separatrix;
* the invariant blow-up wedge and its cusp-bounded subset from which
  every trajectory escapes to infinity in finite time, with the explicit
  time bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import BracketFailure, EmptyRegion, GammaBelowThreshold, NoValidCusp
from .integrate import IntegratorSettings
from .model import SystemConfig
from .regions import Arc, RegionSpec

__all__ = [
    "TrappingHexagon",
    "LevelCurveRegion",
    "BlowupRegion",
    "build_hexagon",
    "build_level_region",
    "separatrix_eval",
    "separatrix_polyline",
    "blowup_barrier_root",
    "blowup_cusp_coeff",
    "blowup_time_bound",
    "build_blowup_region",
    "union_basin_estimate",
    "stay_in_hexagon",
    "hexagon_interior_points",
]

_PLASTIC = 1.3247179572447460  # 2-d low-discrepancy generator root


@dataclass(frozen=True)
class TrappingHexagon:
    """Hexagonal trapping region GHIJKL with curved sides HI and KL.

    The two slopes are chosen so the frozen-forcing extreme fields point
    inward along the curved sides; the straight sides are handled by the
    sign of the field components alone."""

    p: int
    f_pow: float
    F_pow: float
    gamma: float
    lambda1: float
    lambda2: float

    @property
    def y_top(self) -> float:
        return self.lambda1 * self.F_pow ** (2 * self.p)

    @property
    def y_bot(self) -> float:
        return -self.lambda2 * self.f_pow ** (2 * self.p) * (4**self.p - 1)

    @property
    def vertices(self) -> dict:
        return {
            "G": (-self.f_pow, self.y_top),
            "H": (0.0, self.y_top),
            "I": (self.F_pow, 0.0),
            "J": (self.F_pow, self.y_bot),
            "K": (0.0, self.y_bot),
            "L": (-self.f_pow, 0.0),
        }

    def upper_arc(self, x: float) -> float:
        return self.lambda1 * (self.F_pow ** (2 * self.p) - x ** (2 * self.p))

    def lower_arc(self, x: float) -> float:
        return self.lambda2 * (self.f_pow ** (2 * self.p) - (x + 2.0 * self.f_pow) ** (2 * self.p))

    def contains(self, x: float, y: float, tol: float = 0.0) -> bool:
        return bool(
            _kernels.hexagon_contains(
                2 * self.p, self.f_pow, self.F_pow, self.lambda1, self.lambda2,
                self.y_top, self.y_bot, float(x), float(y), float(tol),
            )
        )

    def kernel_args(self):
        return (2 * self.p, self.f_pow, self.F_pow, self.lambda1, self.lambda2, self.y_top, self.y_bot)

    def region_spec(self) -> RegionSpec:
        p, f, F = self.p, self.f_pow, self.F_pow
        lam1, lam2 = self.lambda1, self.lambda2
        y_top, y_bot = self.y_top, self.y_bot

        def seg(a, b):
            return lambda s: (a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]))

        V = self.vertices
        arcs = (
            Arc("top_edge", seg(V["G"], V["H"]), lambda s: (0.0, -1.0), "both",
                coeffs={"y": y_top, "x0": -f, "x1": 0.0}),
            Arc(
                "upper_arch",
                lambda s: (s * F, lam1 * (F ** (2 * p) - (s * F) ** (2 * p))),
                lambda s: (-2.0 * p * lam1 * (s * F) ** (2 * p - 1), -1.0),
                "high",
                coeffs={"lambda1": lam1, "F_pow": F, "p": p},
            ),
            Arc("right_edge", seg(V["I"], V["J"]), lambda s: (-1.0, 0.0), "both",
                coeffs={"x": F, "y0": 0.0, "y1": y_bot}),
            Arc("bottom_edge", seg(V["J"], V["K"]), lambda s: (0.0, 1.0), "both",
                coeffs={"y": y_bot, "x0": F, "x1": 0.0}),
            Arc(
                "lower_arch",
                lambda s: (-s * f, lam2 * (f ** (2 * p) - (-s * f + 2.0 * f) ** (2 * p))),
                lambda s: (2.0 * p * lam2 * (-s * f + 2.0 * f) ** (2 * p - 1), 1.0),
                "low",
                coeffs={"lambda2": lam2, "f_pow": f, "p": p},
            ),
            Arc("left_edge", seg(V["L"], V["G"]), lambda s: (1.0, 0.0), "both",
                coeffs={"x": -f, "y0": 0.0, "y1": y_top}),
        )
        params = {"p": p, "f_pow": f, "F_pow": F, "gamma": self.gamma,
                  "lambda1": lam1, "lambda2": lam2}
        return RegionSpec("trapping_hexagon", params, arcs, self.contains)


def build_hexagon(p: int, f_pow: float, F_pow: float, gamma: float) -> TrappingHexagon:
    """Trapping hexagon for the even-monomial system.

    Requires gamma^2 to clear both the slope-reality bound and the
    bottom-edge bound; otherwise :class:`GammaBelowThreshold` carries the
    two operands."""
    if not (0.0 < f_pow < F_pow):
        raise ValueError("need 0 < f_pow < F_pow")
    q = 2 * p
    bound_top = 8.0 * p * F_pow ** (q - 1)
    bound_bottom = p * (F_pow**q - f_pow**q) / (f_pow * (1.0 - 4.0 ** (-p)))
    if gamma**2 < max(bound_top, bound_bottom):
        raise GammaBelowThreshold(gamma**2, bound_top, bound_bottom)
    disc = 1.0 - bound_top / gamma**2
    lambda1 = gamma / (4.0 * p * F_pow ** (q - 1)) * (1.0 + math.sqrt(max(disc, 0.0)))
    lambda2 = gamma / (2.0 * p * (2.0 * f_pow) ** (q - 1))
    hexa = TrappingHexagon(p=p, f_pow=f_pow, F_pow=F_pow, gamma=gamma, lambda1=lambda1, lambda2=lambda2)
    assert hexa.lambda1 >= 1.0 / gamma
    return hexa


def stay_in_hexagon(
    cfg: SystemConfig,
    hexa: TrappingHexagon,
    s0,
    t_max: float = 200.0,
    tol: float = 1e-6,
    settings: IntegratorSettings | None = None,
) -> tuple[bool, float]:
    """Integrate from a point of the hexagon and report whether the orbit
    ever leaves it by more than ``tol``.  Returns (stayed, exit_time)."""
    st = settings or IntegratorSettings(t_max=t_max, max_step=0.25)
    gamma, gk, gp, gc, freqs, re, im = cfg.kernel_args()
    two_p, f, F, lam1, lam2, y_top, y_bot = hexa.kernel_args()
    ok, t_exit = _kernels.stay_in_hexagon_loop(
        gamma, gk, gp, gc, freqs, re, im,
        two_p, f, F, lam1, lam2, y_top, y_bot,
        s0[0], s0[1], s0[2] if len(s0) > 2 else 0.0,
        t_max, st.rel_tol, st.abs_tol, st.max_step, st.min_step, st.escape_radius, tol,
    )
    return bool(ok), float(t_exit)


def hexagon_interior_points(hexa: TrappingHexagon, n: int, margin: float = 1e-3) -> np.ndarray:
    """Deterministic low-discrepancy points strictly inside the hexagon."""
    a1 = 1.0 / _PLASTIC
    a2 = 1.0 / _PLASTIC**2
    xs0, xs1 = -hexa.f_pow, hexa.F_pow
    ys0, ys1 = hexa.y_bot, hexa.y_top
    out = []
    k = 0
    while len(out) < n and k < 100_000:
        k += 1
        u = (0.5 + k * a1) % 1.0
        v = (0.5 + k * a2) % 1.0
        x = xs0 + u * (xs1 - xs0)
        y = ys0 + v * (ys1 - ys0)
        if hexa.contains(x, y, tol=-margin):
            out.append((x, y))
    if len(out) < n:
        raise RuntimeError("could not place interior points")
    return np.array(out)


# --- frozen-energy level region (p = 1) ------------------------------------


def _u_frozen(c0: float, v):
    return v**3 / 3.0 + c0 * v**2


@dataclass(frozen=True)
class LevelCurveRegion:
    """Bounded component of a frozen-forcing energy sublevel set around
    the stable equilibrium, expressed in original coordinates via
    v = x - c0.  Left axis crossing sits at c2 * gamma^(-1/2) inside the
    separatrix crossing."""

    c0: float
    gamma: float
    c2: float
    beta: float
    energy: float
    v_left: float
    v_right: float

    @property
    def x_left(self) -> float:
        return self.c0 + self.v_left

    @property
    def x_right(self) -> float:
        return self.c0 + self.v_right

    def contains(self, x: float, y: float) -> bool:
        v = x - self.c0
        if not (self.v_left <= v <= self.v_right):
            return False
        return 0.5 * y * y + _u_frozen(self.c0, v) <= self.energy

    def boundary(self, n: int = 512) -> np.ndarray:
        theta = np.linspace(0.0, 2.0 * math.pi, n)
        vmid = 0.5 * (self.v_left + self.v_right)
        vhal = 0.5 * (self.v_right - self.v_left)
        v = vmid + vhal * np.cos(theta)
        w = np.sqrt(np.maximum(2.0 * (self.energy - _u_frozen(self.c0, v)), 0.0))
        w[theta > math.pi] *= -1.0
        return np.column_stack([v + self.c0, w])

    def region_spec(self) -> RegionSpec:
        c0, E = self.c0, self.energy
        vmid = 0.5 * (self.v_left + self.v_right)
        vhal = 0.5 * (self.v_right - self.v_left)

        def point(s):
            theta = 2.0 * math.pi * s
            v = vmid + vhal * math.cos(theta)
            w = math.sqrt(max(2.0 * (E - _u_frozen(c0, v)), 0.0))
            if theta > math.pi:
                w = -w
            return v + c0, w

        def normal(s):
            theta = 2.0 * math.pi * s
            v = vmid + vhal * math.cos(theta)
            w = math.sqrt(max(2.0 * (E - _u_frozen(c0, v)), 0.0))
            if theta > math.pi:
                w = -w
            return -(v * v + 2.0 * c0 * v), -w

        arcs = (
            Arc("frozen_level_curve", point, normal, "none",
                coeffs={"c0": c0, "energy": E, "v_left": self.v_left, "v_right": self.v_right}),
        )
        params = {"c0": c0, "gamma": self.gamma, "c2": self.c2, "beta": self.beta, "energy": E}
        return RegionSpec("level_region", params, arcs, self.contains)


def build_level_region(c0: float, gamma: float, c2: float = 1.0) -> LevelCurveRegion:
    """Level region pinned by its left axis crossing at
    -2 c0 + c2 / sqrt(gamma) in the shifted coordinate (exponent 1/2 is
    the decay rate of the estimate toward the separatrix)."""
    beta = 0.5
    eps_b = (1.0 / gamma) ** beta
    v_left = -2.0 * c0 + c2 * eps_b
    if v_left >= 0.0:
        raise EmptyRegion(f"c2 * gamma^-{beta:g} = {c2 * eps_b:g} >= 2 c0 = {2 * c0:g}")
    energy = _u_frozen(c0, v_left)
    assert 0.0 < energy < _u_frozen(c0, -2.0 * c0)
    lo, hi = 0.0, 1.0
    while _u_frozen(c0, hi) < energy:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _u_frozen(c0, mid) < energy:
            lo = mid
        else:
            hi = mid
    return LevelCurveRegion(c0=c0, gamma=gamma, c2=c2, beta=beta, energy=energy,
                            v_left=v_left, v_right=0.5 * (lo + hi))


def separatrix_eval(c0: float, x: float) -> tuple[float, float]:
    """Both branches of the frozen-system separatrix at abscissa x; zero
    at the endpoints -c0 and 2 c0."""
    rad = 2.0 * (2.0 * c0**3 - x**3 + 3.0 * c0**2 * x) / 3.0
    if rad < -1e-12 * max(1.0, c0**3):
        raise ValueError(f"x = {x:g} outside the separatrix span [-c0, 2 c0]")
    y = math.sqrt(max(rad, 0.0))
    return y, -y


def separatrix_polyline(c0: float, n: int = 512) -> np.ndarray:
    xs = np.linspace(-c0, 2.0 * c0, n)
    rad = np.maximum(2.0 * (2.0 * c0**3 - xs**3 + 3.0 * c0**2 * xs) / 3.0, 0.0)
    ys = np.sqrt(rad)
    return np.vstack([np.column_stack([xs, ys]), np.column_stack([xs[::-1], -ys[::-1]])])


# --- blow-up sets -----------------------------------------------------------


def _h_barrier(p: int, f_pow: float, F_pow: float, gamma: float, x):
    q = 2 * p
    return 2.0 * p * x ** (q - 1) * (F_pow**q - x**q) - gamma**2 * (F_pow**q - f_pow**q)


def blowup_barrier_root(p: int, f_pow: float, F_pow: float, gamma: float) -> float:
    """The unique abscissa -xi < -F_pow where the drag curve turns
    absorbing; returned as the positive magnitude xi.

    Bracketing doubles leftward from -F_pow (the barrier function is
    negative there and grows without bound); uniqueness is cross-checked
    by a sign scan."""
    if not (0.0 < f_pow < F_pow):
        raise ValueError("need 0 < f_pow < F_pow")
    scale = gamma**2 * (F_pow ** (2 * p) - f_pow ** (2 * p))
    a = -F_pow
    assert _h_barrier(p, f_pow, F_pow, gamma, a) < 0.0
    b = -2.0 * F_pow
    for _ in range(200):
        if _h_barrier(p, f_pow, F_pow, gamma, b) > 0.0:
            break
        b *= 2.0
    else:
        raise BracketFailure("barrier function never turned positive")
    lo, hi = b, a  # h(lo) > 0 > h(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _h_barrier(p, f_pow, F_pow, gamma, mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if abs(_h_barrier(p, f_pow, F_pow, gamma, 0.5 * (lo + hi))) <= 1e-10 * scale:
            break
    root = 0.5 * (lo + hi)
    scan = np.linspace(b, -F_pow, 1001)
    signs = np.sign(_h_barrier(p, f_pow, F_pow, gamma, scan))
    changes = int(np.count_nonzero(signs[:-1] * signs[1:] < 0))
    if changes != 1:
        raise BracketFailure(f"expected one sign change left of -F, found {changes}")
    return -root


def blowup_cusp_coeff(p: int, F_pow: float, gamma: float, x0: float) -> float:
    """Largest safe cusp coefficient (with a 0.9 margin) keeping the
    escape set's curved lid absorbing for the upper-extreme field.

    Solves the closed-form discriminant bound, then re-verifies the
    quadratic positivity, the curvature condition, and that the lid never
    meets the drag curve over a thousandfold window."""
    q = p * F_pow ** (2 * p - 2)
    if x0 <= F_pow:
        raise ValueError("anchor must lie beyond F_pow")
    b_sq = 8.0 * x0 * q * q / (gamma**2 + 12.0 * x0 * q)
    b = 0.9 * math.sqrt(b_sq)
    if not (b > 0.0):
        raise NoValidCusp("closed-form bound collapsed to zero")
    a2 = q - 1.5 * b * b
    if a2 <= 0.0:
        raise NoValidCusp("curvature condition failed")
    if gamma**2 * b * b > 8.0 * a2 * x0 * q * (1.0 + 1e-12):
        raise NoValidCusp("discriminant condition failed after margin")
    v = np.linspace(0.0, 100.0, 4001)
    M = a2 * v**2 - gamma * b * v + 2.0 * x0 * q
    if M.min() < 0.0:
        raise NoValidCusp("quadratic lower bound dipped negative")
    assert 1.5 < 2 * p
    xs = -np.geomspace(x0, 1e3 * x0, 2001)
    lid = -b * np.power(-x0 - xs, 1.5)
    drag = (F_pow ** (2 * p) - xs ** (2 * p)) / gamma
    if np.any(lid <= drag):
        raise NoValidCusp("cusp lid touched the drag curve inside the window")
    return b


def blowup_time_bound(b: float, u0: float) -> float:
    """Upper bound on the escape time from depth u0 beyond the anchor."""
    if b <= 0.0 or u0 <= 0.0:
        raise ValueError("need positive cusp coefficient and depth")
    return 2.0 / (b * math.sqrt(u0))


@dataclass(frozen=True)
class BlowupRegion:
    """Invariant escape wedge (between the time axis and the drag curve,
    left of the barrier root) and its cusp-lidded subset from which
    trajectories reach infinity in finite time."""

    p: int
    f_pow: float
    F_pow: float
    gamma: float
    xi_root: float
    x0: float
    b: float
    rho: float
    window_x_min: float

    def drag_curve(self, x):
        return (self.F_pow ** (2 * self.p) - np.asarray(x) ** (2 * self.p)) / self.gamma

    def lid(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.where(x <= -self.x0, -self.b * np.power(np.maximum(-self.x0 - x, 0.0), self.rho), 0.0)

    def contains_wedge(self, x: float, y: float) -> bool:
        return x <= -self.xi_root and self.drag_curve(x) <= y <= 0.0

    def contains(self, x: float, y: float) -> bool:
        return x <= -self.xi_root and self.drag_curve(x) <= y <= float(self.lid(x))

    def region_spec(self) -> RegionSpec:
        p, F, g = self.p, self.F_pow, self.gamma
        xr, x0, b, xm = self.xi_root, self.x0, self.b, self.window_x_min

        arcs = (
            Arc(
                "flat_lid",
                lambda s: (-xr + s * (-x0 + xr), 0.0),
                lambda s: (0.0, -1.0),
                "both",
                coeffs={"y": 0.0, "x0": -xr, "x1": -x0},
            ),
            Arc(
                "cusp_lid",
                lambda s: (-x0 + s * (xm + x0), float(self.lid(-x0 + s * (xm + x0)))),
                lambda s: (1.5 * b * math.sqrt(max(-x0 - (-x0 + s * (xm + x0)), 0.0)), -1.0),
                "high",
                coeffs={"b": b, "x_anchor": -x0, "rho": self.rho},
            ),
            Arc(
                "window_edge",
                lambda s: (xm, float(self.lid(xm)) + s * (float(self.drag_curve(xm)) - float(self.lid(xm)))),
                lambda s: (1.0, 0.0),
                "none",
                coeffs={"x": xm},
            ),
            Arc(
                "drag_floor",
                lambda s: (xm + s * (-xr - xm), float(self.drag_curve(xm + s * (-xr - xm)))),
                lambda s: (2.0 * p * (xm + s * (-xr - xm)) ** (2 * p - 1) / g, 1.0),
                "low",
                coeffs={"F_pow": F, "gamma": g, "p": p},
            ),
            Arc(
                "barrier_edge",
                lambda s: (-xr, float(self.drag_curve(-xr)) * (1.0 - s)),
                lambda s: (-1.0, 0.0),
                "both",
                coeffs={"x": -xr, "y0": float(self.drag_curve(-xr)), "y1": 0.0},
            ),
        )
        params = {
            "p": p, "f_pow": self.f_pow, "F_pow": F, "gamma": g,
            "xi_root": xr, "x0": x0, "b": b, "rho": self.rho, "window_x_min": xm,
        }
        return RegionSpec("blowup_set", params, arcs, self.contains)

    def wedge_region_spec(self) -> RegionSpec:
        p, F, g = self.p, self.F_pow, self.gamma
        xr, xm = self.xi_root, self.window_x_min
        arcs = (
            Arc("flat_lid", lambda s: (-xr + s * (xm + xr), 0.0), lambda s: (0.0, -1.0), "both",
                coeffs={"y": 0.0}),
            Arc("window_edge", lambda s: (xm, s * float(self.drag_curve(xm))), lambda s: (1.0, 0.0), "none",
                coeffs={"x": xm}),
            Arc(
                "drag_floor",
                lambda s: (xm + s * (-xr - xm), float(self.drag_curve(xm + s * (-xr - xm)))),
                lambda s: (2.0 * p * (xm + s * (-xr - xm)) ** (2 * p - 1) / g, 1.0),
                "low",
                coeffs={"F_pow": F, "gamma": g, "p": p},
            ),
            Arc("barrier_edge", lambda s: (-xr, float(self.drag_curve(-xr)) * (1.0 - s)),
                lambda s: (-1.0, 0.0), "both", coeffs={"x": -xr}),
        )
        params = {"p": p, "f_pow": self.f_pow, "F_pow": F, "gamma": g, "xi_root": xr,
                  "window_x_min": xm}
        return RegionSpec("blowup_wedge", params, arcs, self.contains_wedge)


def build_blowup_region(
    p: int,
    f_pow: float,
    F_pow: float,
    gamma: float,
    x0: float,
    window_factor: float = 50.0,
) -> BlowupRegion:
    """Escape set anchored at depth x0 (which must clear the barrier
    root); the infinite extent is represented by the analytic membership
    predicate plus a finite render window."""
    xi = blowup_barrier_root(p, f_pow, F_pow, gamma)
    if x0 < xi:
        raise ValueError(f"anchor x0 = {x0:g} must be >= barrier root {xi:g}")
    b = blowup_cusp_coeff(p, F_pow, gamma, x0)
    return BlowupRegion(
        p=p, f_pow=f_pow, F_pow=F_pow, gamma=gamma,
        xi_root=xi, x0=x0, b=b, rho=1.5, window_x_min=-window_factor * x0,
    )


def union_basin_estimate(level: LevelCurveRegion | None, hexa: TrappingHexagon) -> RegionSpec:
    """Union of the level region and the hexagon as a basin estimate.

    Membership is the disjunction of the two analytic predicates; the
    exported boundary is clipped with shapely.  Asserts the union strictly
    exceeds both pieces (each sticks out of the other), except in the
    degenerate empty-level case which returns the hexagon flagged."""
    hex_spec = hexa.region_spec()
    if level is None:
        return RegionSpec("union_basin_estimate", {**hex_spec.params, "degenerate": True},
                          hex_spec.arcs, hexa.contains)

    from shapely.geometry import Polygon

    hex_poly = Polygon([tuple(q) for q in hex_spec.polyline(per_arc=256)]).buffer(0)
    lev_poly = Polygon([tuple(q) for q in level.boundary(1024)]).buffer(0)

    hex_pts = hex_spec.polyline(per_arc=64)
    lev_pts = level.boundary(256)
    hex_outside = any(not level.contains(float(x), float(y)) for x, y in hex_pts)
    lev_outside = any(not hexa.contains(float(x), float(y)) for x, y in lev_pts)
    assert hex_outside, "hexagon unexpectedly contained in the level region"
    assert lev_outside, "level region unexpectedly contained in the hexagon"

    merged = hex_poly.union(lev_poly)
    boundary = np.array(merged.exterior.coords)

    def contains(x, y):
        return hexa.contains(x, y) or level.contains(x, y)

    def point(s):
        i = min(int(s * (len(boundary) - 1)), len(boundary) - 2)
        frac = s * (len(boundary) - 1) - i
        x = boundary[i, 0] + frac * (boundary[i + 1, 0] - boundary[i, 0])
        y = boundary[i, 1] + frac * (boundary[i + 1, 1] - boundary[i, 1])
        return float(x), float(y)

    arcs = (Arc("clipped_union", point, lambda s: (0.0, 0.0), "none",
                coeffs={"n_vertices": len(boundary)}),)
    params = {
        "hexagon": hex_spec.params,
        "level_region": {"c0": level.c0, "gamma": level.gamma, "c2": level.c2,
                         "beta": level.beta, "energy": level.energy},
    }
    return RegionSpec("union_basin_estimate", params, arcs, contains)
