"""System definition: forcing spectrum, frequency vector, nonlinearity,
dissipation, and the planar vector fields they induce.

The oscillator is ``x'' + gamma x' + g(x) = f(omega t)`` with ``f`` given
through truncated Fourier coefficients on an integer lattice and ``g``
one of three polynomial families.  All types are immutable after
construction and safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Mapping

import numpy as np

from . import _kernels
from .errors import NoTransversalRoot, WrongNonlinearity

__all__ = [
    "FrequencyVector",
    "ForcingSpectrum",
    "Nonlinearity",
    "SystemConfig",
    "PhaseState",
    "ForcingBounds",
    "forcing_eval",
    "diophantine_margin",
    "equilibrium",
    "equilibrium_candidates",
    "vector_field",
    "extreme_fields",
    "estimate_forcing_bounds",
]


@dataclass(frozen=True)
class FrequencyVector:
    """Drive frequencies with their non-resonance constants.

    ``c0_dioph`` and ``tau`` parameterize the lower bound
    ``|omega . nu| >= c0_dioph * |nu|_1**(-tau)`` checked by
    :func:`diophantine_margin`.  For a single frequency the bound is
    automatic and ``tau`` may be zero.
    """

    omega: tuple[float, ...]
    c0_dioph: float = 0.5
    tau: float = 0.0

    def __post_init__(self):
        omega = tuple(float(w) for w in self.omega)
        object.__setattr__(self, "omega", omega)
        if len(omega) < 1:
            raise ValueError("need at least one frequency")
        if not all(math.isfinite(w) for w in omega):
            raise ValueError("frequencies must be finite")
        if all(w == 0.0 for w in omega):
            raise ValueError("frequency vector must be nonzero")
        if self.c0_dioph <= 0.0:
            raise ValueError("c0_dioph must be positive")
        d = len(omega)
        if d > 1 and self.tau <= d - 1:
            raise ValueError(f"tau must exceed d - 1 = {d - 1} for d = {d}")
        if self.tau < 0.0:
            raise ValueError("tau must be nonnegative")

    @property
    def dim(self) -> int:
        return len(self.omega)

    def dot(self, nu) -> float:
        return float(sum(w * n for w, n in zip(self.omega, nu)))


def _lattice_norm(nu) -> int:
    return int(sum(abs(int(n)) for n in nu))


def _canonical_modes(coeffs: Mapping[tuple, complex]):
    return sorted(coeffs.keys(), key=lambda nu: (_lattice_norm(nu), nu))


@dataclass(frozen=True)
class ForcingSpectrum:
    """Truncated Fourier coefficients of the drive.

    ``coeffs`` maps lattice vectors (length-``dim`` integer tuples) to
    complex amplitudes.  Stored modes must come in conjugate pairs with a
    real, nonzero average, and obey the analyticity envelope
    ``|f_nu| <= envelope_F * exp(-envelope_xi * |nu|_1)``.  The envelope
    also bounds the modes *not* stored; it feeds the tail slack used by
    :func:`estimate_forcing_bounds`.
    """

    dim: int
    coeffs: Mapping[tuple, complex]
    envelope_F: float
    envelope_xi: float

    def __post_init__(self):
        clean = {}
        for nu, amp in self.coeffs.items():
            key = tuple(int(n) for n in (nu if isinstance(nu, (tuple, list)) else (nu,)))
            if len(key) != self.dim:
                raise ValueError(f"mode {key} does not match dim={self.dim}")
            clean[key] = complex(amp)
        object.__setattr__(self, "coeffs", clean)
        if self.envelope_F <= 0.0 or self.envelope_xi <= 0.0:
            raise ValueError("envelope constants must be positive")
        zero = (0,) * self.dim
        f0 = clean.get(zero, 0.0 + 0.0j)
        if abs(f0.imag) > 1e-14 * max(1.0, abs(f0)):
            raise ValueError("average coefficient must be real")
        if f0 == 0:
            raise ValueError("average coefficient must be nonzero")
        for nu, amp in clean.items():
            mirror = tuple(-n for n in nu)
            if mirror not in clean:
                raise ValueError(f"mode {nu} stored without its conjugate partner")
            conj = clean[mirror]
            if abs(conj - amp.conjugate()) > 1e-14 * max(1.0, abs(amp)):
                raise ValueError(f"reality violated at mode {nu}")
            bound = self.envelope_F * math.exp(-self.envelope_xi * _lattice_norm(nu))
            if abs(amp) > bound * (1.0 + 1e-12):
                raise ValueError(f"mode {nu} exceeds the declared envelope")

    @classmethod
    def from_modes(cls, dim, coeffs, envelope_xi=8.0, envelope_F=None):
        """Build a spectrum, fitting the tightest envelope at the given
        decay rate when ``envelope_F`` is omitted.

        The default rate treats the stored truncation as essentially
        complete (relative tail ~ exp(-envelope_xi)).
        """
        if envelope_F is None:
            envelope_F = 0.0
            for nu, amp in coeffs.items():
                key = nu if isinstance(nu, (tuple, list)) else (nu,)
                envelope_F = max(envelope_F, abs(complex(amp)) * math.exp(envelope_xi * _lattice_norm(key)))
            envelope_F = max(envelope_F, 1e-300)
        return cls(dim=dim, coeffs=coeffs, envelope_F=envelope_F, envelope_xi=envelope_xi)

    @property
    def f0(self) -> float:
        return self.coeffs[(0,) * self.dim].real

    @property
    def n_trunc(self) -> int:
        return max(_lattice_norm(nu) for nu in self.coeffs)

    def modes(self):
        for nu in _canonical_modes(self.coeffs):
            yield nu, self.coeffs[nu]

    def as_arrays(self, freq: FrequencyVector):
        """Flat (freqs, re, im) arrays over all stored modes, canonical order."""
        order = _canonical_modes(self.coeffs)
        freqs = np.array([freq.dot(nu) for nu in order], dtype=np.float64)
        re = np.array([self.coeffs[nu].real for nu in order], dtype=np.float64)
        im = np.array([self.coeffs[nu].imag for nu in order], dtype=np.float64)
        return freqs, re, im

    def abs_sum(self) -> float:
        return float(sum(abs(a) for a in self.coeffs.values()))

    def tail_mass(self) -> float:
        """Envelope bound on the total mass of all unstored modes."""
        total = 0.0
        n = self.n_trunc + 1
        while True:
            term = _shell_count(n, self.dim) * self.envelope_F * math.exp(-self.envelope_xi * n)
            total += term
            if term < 1e-300 or term < 1e-18 * max(total, 1.0) or n > self.n_trunc + 10_000:
                break
            n += 1
        return total


def _shell_count(n: int, d: int) -> int:
    # lattice points of Z^d with |nu|_1 == n  (n >= 1)
    if d == 1:
        return 2
    if d == 2:
        return 4 * n
    total = 0
    for k in range(1, min(d, n) + 1):
        total += 2**k * math.comb(d, k) * math.comb(n - 1, k - 1)
    return total


_KIND_CODES = {"odd": 0, "even": 1, "poly": 2}


@dataclass(frozen=True)
class Nonlinearity:
    """Restoring force family: odd monomial ``x**(2p+1)``, even monomial
    ``x**(2p)``, or a polynomial with positive odd-degree leading term."""

    kind: str
    p: int
    coeffs: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.p < 1:
            raise ValueError("p must be a positive integer")
        if self.kind == "poly":
            if len(self.coeffs) != 2 * self.p + 1:
                raise ValueError("polynomial needs coefficients for degrees 1..2p+1")
            if self.coeffs[-1] <= 0.0:
                raise ValueError("leading coefficient must be positive")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @classmethod
    def odd_monomial(cls, p: int) -> "Nonlinearity":
        return cls("odd", p)

    @classmethod
    def even_monomial(cls, p: int) -> "Nonlinearity":
        return cls("even", p)

    @classmethod
    def polynomial(cls, coeffs) -> "Nonlinearity":
        coeffs = tuple(float(c) for c in coeffs)
        if len(coeffs) % 2 == 0:
            raise ValueError("polynomial must have odd degree 2p+1")
        return cls("poly", (len(coeffs) - 1) // 2, coeffs)

    @property
    def degree(self) -> int:
        return 2 * self.p + 1 if self.kind != "even" else 2 * self.p

    def kernel_args(self):
        return (
            _KIND_CODES[self.kind],
            self.p,
            np.asarray(self.coeffs, dtype=np.float64),
        )

    def value(self, x: float) -> float:
        gk, gp, gc = self.kernel_args()
        return float(_kernels.g_eval(gk, gp, gc, float(x)))

    def derivative(self, x: float) -> float:
        gk, gp, gc = self.kernel_args()
        return float(_kernels.g_prime(gk, gp, gc, float(x)))


@dataclass(frozen=True)
class SystemConfig:
    """Complete oscillator definition.  ``epsilon`` is the reciprocal
    dissipation used by the perturbation expansion."""

    forcing: ForcingSpectrum
    freq: FrequencyVector
    g: Nonlinearity
    gamma: float
    epsilon: float = field(init=False)

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if self.forcing.dim != self.freq.dim:
            raise ValueError("forcing and frequency dimensions differ")
        eps = 1.0 / self.gamma
        object.__setattr__(self, "epsilon", eps)
        assert abs(eps * self.gamma - 1.0) <= 1e-15

    def kernel_args(self):
        gk, gp, gc = self.g.kernel_args()
        freqs, re, im = self.forcing.as_arrays(self.freq)
        return self.gamma, gk, gp, gc, freqs, re, im


@dataclass(frozen=True)
class PhaseState:
    """Point of the extended phase space (position, velocity, time)."""

    x: float
    y: float
    t: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.t)):
            raise ValueError("phase state must be finite")


@dataclass(frozen=True)
class ForcingBounds:
    """Certified range of t -> f(omega t) plus the 2p-th roots used by the
    even-case constructions (roots are NaN when the lower bound is not
    positive)."""

    f_low: float
    f_up: float
    f_pow: float
    F_pow: float

    @classmethod
    def exact(cls, f_low: float, f_up: float, p: int) -> "ForcingBounds":
        if f_up < f_low:
            raise ValueError("upper bound below lower bound")
        f_pow = f_low ** (1.0 / (2 * p)) if f_low > 0 else math.nan
        return cls(f_low, f_up, f_pow, f_up ** (1.0 / (2 * p)))


def forcing_eval(forcing: ForcingSpectrum, freq: FrequencyVector, t: float) -> float:
    """Value of the drive at time t; the imaginary residue of the complex
    mode sum is asserted below 1e-12 of the total mass and discarded."""
    total = 0.0 + 0.0j
    for nu, amp in forcing.coeffs.items():
        total += amp * np.exp(1j * freq.dot(nu) * t)
    assert abs(total.imag) < 1e-12 * max(forcing.abs_sum(), 1e-300)
    return float(total.real)


def _lattice_points(d: int, N: int):
    if d == 1:
        for n in range(1, N + 1):
            yield (n,)
            yield (-n,)
        return
    for nu in product(range(-N, N + 1), repeat=d):
        r = sum(abs(n) for n in nu)
        if 0 < r <= N:
            yield nu


def diophantine_margin(freq: FrequencyVector, N: int = 200) -> float:
    """min over 0 < |nu|_1 <= N of |omega . nu| |nu|_1^tau / c0.

    A value >= 1 certifies the non-resonance bound on the truncation; an
    exact resonance collapses the margin to zero.  The condition itself
    quantifies over the whole lattice, which is not finitely checkable;
    the default scan depth covers every mode any solver here touches.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    best = math.inf
    for nu in _lattice_points(freq.dim, N):
        r = sum(abs(n) for n in nu)
        val = abs(freq.dot(nu)) * r**freq.tau / freq.c0_dioph
        if val < best:
            best = val
    return best


def equilibrium_candidates(g: Nonlinearity, f0: float):
    """All real roots of g(c) = f0 found by sign scan + bisection, Newton
    polished, with their slopes; tangential (double) roots are not sought."""
    if g.kind == "odd":
        c = math.copysign(abs(f0) ** (1.0 / (2 * g.p + 1)), f0) if f0 != 0.0 else 0.0
        return [(c, g.derivative(c))]
    if g.kind == "even":
        if f0 <= 0.0:
            return []
        c = f0 ** (1.0 / (2 * g.p))
        return [(c, g.derivative(c)), (-c, g.derivative(-c))]

    bound = 1.0 + sum(abs(a) for a in g.coeffs) + abs(f0)
    xs = np.linspace(-bound, bound, 8193)
    vals = np.array([g.value(x) - f0 for x in xs])
    roots = []
    for i in range(len(xs) - 1):
        a, b = xs[i], xs[i + 1]
        fa, fb = vals[i], vals[i + 1]
        if fa == 0.0:
            roots.append(a)
            continue
        if fa * fb < 0.0:
            lo, hi, flo = a, b, fa
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                fm = g.value(mid) - f0
                if fm == 0.0:
                    lo = hi = mid
                    break
                if flo * fm < 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fm
                if hi - lo < 1e-16 * bound:
                    break
            roots.append(0.5 * (lo + hi))
    if vals[-1] == 0.0:
        roots.append(xs[-1])

    polished = []
    for r in roots:
        c = r
        for _ in range(5):
            d = g.derivative(c)
            if d == 0.0:
                break
            c -= (g.value(c) - f0) / d
        if not any(abs(c - q) < 1e-9 * bound for q, _ in polished):
            polished.append((c, g.derivative(c)))
    return polished


def equilibrium(g: Nonlinearity, f0: float) -> float:
    """The transversal equilibrium c with g(c) = f0 and g'(c) != 0.

    For even monomials the positive root is returned; for polynomials the
    root with the largest slope magnitude.  Raises
    :class:`NoTransversalRoot` when no such root exists.
    """
    cands = equilibrium_candidates(g, f0)
    if g.kind == "even":
        cands = [(c, d) for c, d in cands if c > 0]
    cands = [(c, d) for c, d in cands if abs(d) > 1e-9]
    if not cands:
        raise NoTransversalRoot(f"no transversal root of g(c) = {f0:g} for kind={g.kind}")
    c0 = max(cands, key=lambda cd: abs(cd[1]))[0]
    assert abs(g.value(c0) - f0) <= 1e-12 * max(1.0, abs(f0))
    return c0


def vector_field(cfg: SystemConfig, s: PhaseState) -> tuple[float, float]:
    """The nonautonomous field (x', y') at the given state."""
    f = forcing_eval(cfg.forcing, cfg.freq, s.t)
    return s.y, f - cfg.gamma * s.y - cfg.g.value(s.x)


def extreme_fields(cfg: SystemConfig, bounds: ForcingBounds, s: PhaseState):
    """Frozen-forcing fields at the lower and upper bound of the drive.

    Any instantaneous field is a convex combination of the two; only the
    even-monomial family supports the trapping constructions that rely on
    this."""
    if cfg.g.kind != "even":
        raise WrongNonlinearity("extreme fields require an even monomial nonlinearity")
    gx = cfg.g.value(s.x)
    lo = (s.y, bounds.f_low - cfg.gamma * s.y - gx)
    hi = (s.y, bounds.f_up - cfg.gamma * s.y - gx)
    return lo, hi


def estimate_forcing_bounds(
    forcing: ForcingSpectrum,
    freq: FrequencyVector,
    p: int,
    n_samples: int = 1 << 16,
    n_periods: float = 50.0,
) -> ForcingBounds:
    """Certified numeric bounds of the drive: dense sampling over many
    periods of the slowest stored mode, widened by the envelope bound on
    the unstored tail."""
    mus = [abs(freq.dot(nu)) for nu, _ in forcing.modes() if any(nu)]
    if mus:
        span = n_periods * 2.0 * math.pi / min(mus)
    else:
        span = 1.0
    ts = np.linspace(0.0, span, n_samples, endpoint=False)
    total = np.zeros_like(ts)
    for nu, amp in forcing.modes():
        mu = freq.dot(nu)
        total += amp.real * np.cos(mu * ts) - amp.imag * np.sin(mu * ts)
    slack = forcing.tail_mass()
    f_low = float(total.min()) - slack
    f_up = float(total.max()) + slack
    f_pow = f_low ** (1.0 / (2 * p)) if f_low > 0 else math.nan
    return ForcingBounds(f_low, f_up, f_pow, f_up ** (1.0 / (2 * p)))
