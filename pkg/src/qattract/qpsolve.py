"""Quasi-periodic response solver.

Two independent routes to the response with the drive's frequencies:

* harmonic balance -- Newton iteration on truncated Fourier coefficients,
  imposing ``((i mu)^2 + gamma (i mu)) x_nu + (g o x)_nu = f_nu`` per
  lattice mode, with the nonlinear term evaluated pseudo-spectrally on an
  alias-free torus grid;
* a reciprocal-dissipation power series solved order by order, each
  order's average fixed by the next order's zero-mean solvability
  condition.

Cross-validating the two is what the consistency tests (and the
acceptance suite) do.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import NewtonDiverged, SmallDivisorOverflow
from .model import PhaseState, SystemConfig, diophantine_margin, equilibrium

__all__ = [
    "FourierLattice",
    "FourierSolution",
    "PerturbationSeries",
    "default_lattice",
    "harmonic_balance_solve",
    "perturbation_series",
    "eval_solution",
    "eval_many",
    "orbit_distance",
    "residual_report",
    "write_solution_csv",
    "write_summary_json",
]

_DEEP_TOL = 1e-13
_CONTRACT_TOL = 1e-10
_MAX_ITER = 80


@dataclass(frozen=True)
class FourierLattice:
    """Truncated integer lattice |nu|_1 <= N in graded lexicographic order
    (deterministic; the zero mode is always first)."""

    dim: int
    N: int
    points: tuple

    @classmethod
    def build(cls, dim: int, N: int) -> "FourierLattice":
        if dim < 1 or N < 0:
            raise ValueError("need dim >= 1 and N >= 0")
        pts = []
        if dim == 1:
            pts = [(n,) for n in range(-N, N + 1)]
        else:
            for nu in product(range(-N, N + 1), repeat=dim):
                if sum(abs(n) for n in nu) <= N:
                    pts.append(nu)
        pts.sort(key=lambda nu: (sum(abs(n) for n in nu), nu))
        return cls(dim, N, tuple(pts))

    def __len__(self):
        return len(self.points)

    @property
    def index(self):
        return {nu: i for i, nu in enumerate(self.points)}

    def mirror_indices(self) -> np.ndarray:
        idx = self.index
        return np.array([idx[tuple(-n for n in nu)] for nu in self.points], dtype=np.int64)

    def norms(self) -> np.ndarray:
        return np.array([sum(abs(n) for n in nu) for nu in self.points], dtype=np.int64)


class _TorusGrid:
    """FFT bridge between lattice coefficients and values on a uniform
    torus grid of M points per angle."""

    def __init__(self, lattice: FourierLattice, M: int):
        self.lattice = lattice
        self.M = M
        self.shape = (M,) * lattice.dim
        self.size = M**lattice.dim
        idx = np.array([[n % M for n in nu] for nu in lattice.points], dtype=np.int64)
        self.flat = np.ravel_multi_index(tuple(idx.T), self.shape)

    def to_grid(self, coeffs: np.ndarray) -> np.ndarray:
        buf = np.zeros(self.shape, dtype=np.complex128)
        buf.ravel()[self.flat] = coeffs
        return np.fft.ifftn(buf) * self.size

    def to_coeffs(self, values: np.ndarray) -> np.ndarray:
        buf = np.fft.fftn(values) / self.size
        return buf.ravel()[self.flat]

    def full_spectrum(self, values: np.ndarray) -> np.ndarray:
        return np.fft.fftn(values) / self.size

    def pair_diff_flat(self) -> np.ndarray:
        pts = np.array(self.lattice.points, dtype=np.int64)
        diff = np.mod(pts[:, None, :] - pts[None, :, :], self.M)
        return np.ravel_multi_index(tuple(np.moveaxis(diff, -1, 0)), self.shape)


def _grid_size(N: int, degree: int) -> int:
    need = max(4 * (N + 1), (degree + 1) * N + 2)
    return 1 << int(math.ceil(math.log2(need)))


@dataclass(frozen=True)
class FourierSolution:
    """Spectral response coefficients on a truncated lattice.

    Immutable once solved; reality (coefficients at opposite modes are
    conjugate, zero mode real) is validated at construction.
    ``residual_norm`` is the sup over lattice modes of the balance
    residual."""

    lattice: FourierLattice
    coeffs: np.ndarray
    gamma: float
    residual_norm: float
    freqs: np.ndarray

    def __post_init__(self):
        mirror = self.lattice.mirror_indices()
        dev = np.max(np.abs(self.coeffs - np.conj(self.coeffs[mirror])))
        if dev > 1e-9 * max(1.0, float(np.max(np.abs(self.coeffs)))):
            raise ValueError("coefficients violate reality symmetry")

    @property
    def mean(self) -> float:
        return float(self.coeffs[self.lattice.index[(0,) * self.lattice.dim]].real)

    def coeff(self, nu) -> complex:
        return complex(self.coeffs[self.lattice.index[tuple(nu)]])

    def as_arrays(self):
        return (
            np.ascontiguousarray(self.freqs),
            np.ascontiguousarray(self.coeffs.real),
            np.ascontiguousarray(self.coeffs.imag),
        )


def default_lattice(cfg: SystemConfig) -> FourierLattice:
    nf = cfg.forcing.n_trunc
    if cfg.freq.dim == 1:
        return FourierLattice.build(1, max(2 * nf, 16))
    return FourierLattice.build(cfg.freq.dim, nf + 8)


def _forcing_on_lattice(cfg: SystemConfig, lattice: FourierLattice) -> np.ndarray:
    if lattice.N < cfg.forcing.n_trunc:
        raise ValueError("lattice truncation below the forcing truncation")
    out = np.zeros(len(lattice), dtype=np.complex128)
    idx = lattice.index
    for nu, amp in cfg.forcing.modes():
        out[idx[nu]] = amp
    return out


def _lattice_freqs(cfg: SystemConfig, lattice: FourierLattice) -> np.ndarray:
    return np.array([cfg.freq.dot(nu) for nu in lattice.points], dtype=np.float64)


def _g_on_grid(cfg: SystemConfig, vals: np.ndarray) -> np.ndarray:
    gk, gp, gcoef = cfg.g.kernel_args()
    if gk == 0:
        return vals ** (2 * gp + 1)
    if gk == 1:
        return vals ** (2 * gp)
    acc = np.zeros_like(vals)
    for a in gcoef[::-1]:
        acc = acc * vals + a
    return acc * vals


def _gprime_on_grid(cfg: SystemConfig, vals: np.ndarray) -> np.ndarray:
    gk, gp, gcoef = cfg.g.kernel_args()
    if gk == 0:
        return (2 * gp + 1) * vals ** (2 * gp)
    if gk == 1:
        return (2 * gp) * vals ** (2 * gp - 1)
    acc = np.zeros_like(vals)
    for j in range(len(gcoef) - 1, -1, -1):
        acc = acc * vals + (j + 1) * gcoef[j]
    return acc


def _newton_solve(cfg: SystemConfig, lattice: FourierLattice, x0: np.ndarray):
    """Damped Newton on the coefficient vector.  Returns (coeffs, residual
    sup-norm); raises NewtonDiverged on stagnation above the contract
    tolerance."""
    scale = max(1.0, abs(cfg.forcing.f0))
    grid = _TorusGrid(lattice, _grid_size(lattice.N, cfg.g.degree))
    mirror = lattice.mirror_indices()
    freqs = _lattice_freqs(cfg, lattice)
    f_hat = _forcing_on_lattice(cfg, lattice)
    lin = -(freqs**2) + 1j * cfg.gamma * freqs
    diff_flat = grid.pair_diff_flat()

    def symmetrize(c):
        return 0.5 * (c + np.conj(c[mirror]))

    def residual(c):
        vals = grid.to_grid(c)
        g_hat = grid.to_coeffs(_g_on_grid(cfg, vals.real))
        return lin * c + g_hat - f_hat, vals

    x = symmetrize(x0.astype(np.complex128))
    res, vals = residual(x)
    rnorm = float(np.max(np.abs(res)))
    history = [rnorm]

    for _ in range(_MAX_ITER):
        if rnorm <= _DEEP_TOL * scale:
            break
        gp_full = grid.full_spectrum(_gprime_on_grid(cfg, vals.real))
        jac = gp_full.ravel()[diff_flat]
        jac[np.arange(len(lattice)), np.arange(len(lattice))] += lin
        try:
            delta = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError as exc:
            raise NewtonDiverged(f"singular balance Jacobian: {exc}") from exc

        step = 1.0
        accepted = False
        for _ in range(9):
            cand = symmetrize(x + step * delta)
            dev = np.max(np.abs(cand - np.conj(cand[mirror])))
            assert dev <= 1e-12 * max(1.0, float(np.max(np.abs(cand))))
            res_c, vals_c = residual(cand)
            rn_c = float(np.max(np.abs(res_c)))
            if rn_c < rnorm or rn_c <= _DEEP_TOL * scale:
                x, res, vals, rnorm = cand, res_c, vals_c, rn_c
                accepted = True
                break
            step *= 0.5
        history.append(rnorm)
        if not accepted or (len(history) > 5 and rnorm > history[-6] / 10.0):
            if rnorm <= _CONTRACT_TOL * scale:
                break
            raise NewtonDiverged(
                f"residual stagnated at {rnorm:.3e} (tolerance {_CONTRACT_TOL * scale:.3e}); "
                "dissipation may be below the solvable range or the truncation too small"
            )

    if rnorm > _CONTRACT_TOL * scale:
        raise NewtonDiverged(f"residual {rnorm:.3e} above contract tolerance")
    return x, rnorm


def _outer_shell_mass(lattice: FourierLattice, coeffs: np.ndarray) -> float:
    norms = lattice.norms()
    return float(np.sum(np.abs(coeffs[norms == lattice.N])))


def harmonic_balance_solve(
    cfg: SystemConfig,
    lattice: FourierLattice | None = None,
    guess: FourierSolution | None = None,
) -> FourierSolution:
    """Solve the mode-by-mode balance by damped Newton iteration.

    With no explicit lattice the default truncation is used and doubled
    (up to three times) until the outermost shell carries less than 1e-12
    relative coefficient mass.  The default initial iterate puts the
    transversal equilibrium in the zero mode.
    """
    c0 = equilibrium(cfg.g, cfg.forcing.f0)
    auto = lattice is None
    lat = default_lattice(cfg) if auto else lattice
    scale = max(1.0, abs(cfg.forcing.f0))

    for attempt in range(4):
        x0 = np.zeros(len(lat), dtype=np.complex128)
        x0[lat.index[(0,) * lat.dim]] = c0
        if guess is not None:
            gidx = guess.lattice.index
            for i, nu in enumerate(lat.points):
                if nu in gidx:
                    x0[i] = guess.coeffs[gidx[nu]]
        coeffs, rnorm = _newton_solve(cfg, lat, x0)
        if not auto or attempt == 3 or _outer_shell_mass(lat, coeffs) < 1e-12 * scale:
            break
        lat = FourierLattice.build(lat.dim, 2 * lat.N)

    return FourierSolution(
        lattice=lat,
        coeffs=coeffs,
        gamma=cfg.gamma,
        residual_norm=rnorm,
        freqs=_lattice_freqs(cfg, lat),
    )


@dataclass(frozen=True)
class PerturbationSeries:
    """Coefficient maps of the reciprocal-dissipation expansion.

    ``terms[k]`` holds the lattice coefficients of order k; order zero is
    the constant equilibrium."""

    lattice: FourierLattice
    terms: tuple
    c0: float
    freqs: np.ndarray

    @property
    def order(self) -> int:
        return len(self.terms) - 1

    def term_eval(self, k: int, t: float) -> float:
        val = np.sum(self.terms[k] * np.exp(1j * self.freqs * t))
        assert abs(val.imag) < 1e-10 * max(1.0, abs(val))
        return float(val.real)

    def partial_sum(self, gamma: float, ts: np.ndarray, upto: int | None = None) -> np.ndarray:
        upto = self.order if upto is None else upto
        ts = np.asarray(ts, dtype=np.float64)
        phases = np.exp(1j * np.outer(ts, self.freqs))
        out = np.zeros(len(ts))
        eps = 1.0 / gamma
        for k in range(upto + 1):
            out += eps**k * (phases @ self.terms[k]).real
        return out


def _series_mul(a: list, b: list, order: int) -> list:
    out = [None] * (order + 1)
    for k in range(order + 1):
        acc = None
        for i in range(k + 1):
            j = k - i
            if i < len(a) and j < len(b) and a[i] is not None and b[j] is not None:
                term = a[i] * b[j]
                acc = term if acc is None else acc + term
        out[k] = acc
    return out


def _series_g(cfg: SystemConfig, series_vals: list, order: int) -> list:
    """Orders 0..order of g composed with the truncated expansion, on the
    grid."""
    gk, gp, gcoef = cfg.g.kernel_args()
    base = [v if v is not None else None for v in series_vals[: order + 1]]
    while len(base) < order + 1:
        base.append(None)

    def power(q):
        acc = [np.ones_like(series_vals[0])] + [None] * order
        cur = base
        e = q
        while e > 0:
            if e & 1:
                acc = _series_mul(acc, cur, order)
            e >>= 1
            if e:
                cur = _series_mul(cur, cur, order)
        return acc

    if gk == 0:
        return power(2 * gp + 1)
    if gk == 1:
        return power(2 * gp)
    total = [None] * (order + 1)
    for j in range(1, len(gcoef) + 1):
        if gcoef[j - 1] == 0.0:
            continue
        pj = power(j)
        for k in range(order + 1):
            if pj[k] is not None:
                term = gcoef[j - 1] * pj[k]
                total[k] = term if total[k] is None else total[k] + term
    return [t if t is not None else np.zeros_like(series_vals[0]) for t in total]


def perturbation_series(cfg: SystemConfig, lattice: FourierLattice, order: int) -> PerturbationSeries:
    """Order-by-order expansion in the reciprocal dissipation.

    Nonzero modes of each order come from dividing the known right side by
    the mode frequency; each order's average is fixed by the zero-mean
    solvability condition at the next order (possible since the
    equilibrium is transversal)."""
    if order < 1:
        raise ValueError("order must be >= 1")
    c0 = equilibrium(cfg.g, cfg.forcing.f0)
    if cfg.freq.dim > 1 and diophantine_margin(cfg.freq, lattice.N) < 1.0:
        raise ValueError("frequency vector fails the non-resonance margin on this lattice")
    freqs = _lattice_freqs(cfg, lattice)
    zero = lattice.index[(0,) * lattice.dim]
    nonzero = np.array([i for i in range(len(lattice)) if i != zero])
    if np.any(np.abs(freqs[nonzero]) < 1e-12):
        raise SmallDivisorOverflow("a lattice mode frequency is below 1e-12")

    grid = _TorusGrid(lattice, _grid_size(lattice.N, cfg.g.degree))
    f_hat = _forcing_on_lattice(cfg, lattice)
    gprime_c0 = cfg.g.derivative(c0)

    hats = [np.zeros(len(lattice), dtype=np.complex128)]
    hats[0][zero] = c0
    vals = [grid.to_grid(hats[0]).real]

    for k in range(1, order + 2):
        m = k - 1
        g_series = _series_g(cfg, vals, m)
        g_hat_m = grid.to_coeffs(g_series[m])
        target = f_hat[zero].real if k == 1 else 0.0
        if m == 0:
            assert abs(g_hat_m[zero].real - cfg.forcing.f0) <= 1e-10 * max(1.0, abs(cfg.forcing.f0))
        else:
            mean_m = (target - g_hat_m[zero].real) / gprime_c0
            hats[m][zero] += mean_m
            vals[m] = vals[m] + mean_m
            g_hat_m[zero] += gprime_c0 * mean_m
        if k > order:
            break
        rhs = (f_hat if k == 1 else 0.0) + freqs**2 * hats[m] - g_hat_m
        assert abs(rhs[zero]) <= 1e-9 * max(1.0, abs(cfg.forcing.f0))
        nxt = np.zeros(len(lattice), dtype=np.complex128)
        nxt[nonzero] = rhs[nonzero] / (1j * freqs[nonzero])
        hats.append(nxt)
        vals.append(grid.to_grid(nxt).real)

    return PerturbationSeries(lattice=lattice, terms=tuple(hats), c0=c0, freqs=freqs)


def eval_solution(sol: FourierSolution, t: float) -> tuple[float, float]:
    """(position, velocity) of the spectral response at time t by direct
    summation; the imaginary residue is asserted below 1e-10."""
    phase = np.exp(1j * sol.freqs * t)
    x = np.sum(sol.coeffs * phase)
    xd = np.sum(sol.coeffs * 1j * sol.freqs * phase)
    m = max(1.0, float(np.sum(np.abs(sol.coeffs))))
    assert abs(x.imag) < 1e-10 * m and abs(xd.imag) < 1e-10 * m * max(1.0, np.max(np.abs(sol.freqs)))
    return float(x.real), float(xd.real)


def eval_many(sol: FourierSolution, ts) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (position, velocity) samples."""
    ts = np.asarray(ts, dtype=np.float64)
    phases = np.exp(1j * np.outer(ts, sol.freqs))
    x = (phases @ sol.coeffs).real
    xd = (phases @ (1j * sol.freqs * sol.coeffs)).real
    return x, xd


def orbit_distance(sol: FourierSolution, s: PhaseState) -> float:
    """Time-synchronized plane distance from a state to the response."""
    x, xd = eval_solution(sol, s.t)
    return math.hypot(s.x - x, s.y - xd)


def residual_report(sol: FourierSolution, cfg: SystemConfig) -> dict:
    """Residual of the balance measured on the doubled lattice.

    ``sup_bound`` dominates the true sup-norm of the continuous residual
    up to the (reported, geometrically extrapolated) mass beyond twice the
    truncation."""
    lat2 = FourierLattice.build(sol.lattice.dim, 2 * sol.lattice.N)
    grid2 = _TorusGrid(lat2, _grid_size(lat2.N, cfg.g.degree))
    idx2 = lat2.index
    x2 = np.zeros(len(lat2), dtype=np.complex128)
    for i, nu in enumerate(sol.lattice.points):
        x2[idx2[nu]] = sol.coeffs[i]
    freqs2 = _lattice_freqs(cfg, lat2)
    f2 = _forcing_on_lattice(cfg, lat2)
    g2 = grid2.to_coeffs(_g_on_grid(cfg, grid2.to_grid(x2).real))
    res2 = (-(freqs2**2) + 1j * cfg.gamma * freqs2) * x2 + g2 - f2
    norms2 = lat2.norms()
    inner = float(np.max(np.abs(res2[norms2 <= sol.lattice.N])))
    tail = float(np.sum(np.abs(res2[norms2 > sol.lattice.N])))
    shell_last = float(np.sum(np.abs(res2[norms2 == lat2.N])))
    shell_prev = float(np.sum(np.abs(res2[norms2 == lat2.N - 1])))
    ratio = shell_last / shell_prev if shell_prev > 0 else 0.0
    beyond = shell_last * ratio / (1.0 - ratio) if 0.0 < ratio < 1.0 else shell_last
    return {
        "lattice_sup": inner,
        "tail_mass": tail,
        "l1_total": float(np.sum(np.abs(res2))),
        "beyond_estimate": beyond,
        "envelope": tail + beyond,
    }


def write_solution_csv(sol: FourierSolution, path) -> None:
    d = sol.lattice.dim
    header = ",".join(f"nu_{i + 1}" for i in range(d)) + ",re,im"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for nu, c in zip(sol.lattice.points, sol.coeffs):
            fh.write(",".join(str(n) for n in nu) + f",{c.real:.17g},{c.imag:.17g}\n")


def write_summary_json(sol: FourierSolution, cfg: SystemConfig, path) -> None:
    summary = {
        "gamma": sol.gamma,
        "residual_norm": sol.residual_norm,
        "mean": sol.mean,
        "c0": equilibrium(cfg.g, cfg.forcing.f0),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
