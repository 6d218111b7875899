"""Hot numeric kernels: spectral sums, the planar vector fields, and the
adaptive Runge-Kutta loops.

Every function in this module is written in nopython-compatible Python.
When numba is importable (and ``QATTRACT_PURE_PYTHON`` is not set) the
public names are rebound to ``@njit``-compiled versions at import time;
otherwise the plain Python definitions are used unchanged.  The two paths
compute bit-identical results; the compiled one is a few hundred times
faster.  ``benchmarks/bench_kernels.py`` measures the gap.

Conventions
-----------
Spectra (forcing or solution) are passed as three flat arrays over the
*full* symmetric mode set: ``freqs[k]`` holds the scalar frequency
``omega . nu_k`` and ``re[k] + i*im[k]`` the complex amplitude.  Reality of
the stored spectrum makes the sine/cosine sum below exactly real.

Nonlinearities are passed as ``(g_kind, g_p, g_coeffs)``:

* ``g_kind == 0`` : odd monomial ``x**(2p+1)``
* ``g_kind == 1`` : even monomial ``x**(2p)``
* ``g_kind == 2`` : polynomial ``sum a_j x**j`` with ``g_coeffs``
  ascending from degree 1 (no constant term)

Field modes: ``mode == 0`` is the forced oscillator
``(y, f(t) - gamma*y - g(x))``; ``mode == 1`` is the deviation system
``(y, -gamma*y - x*D(x, xref(t)))`` where ``xref`` is the spectral
solution carried in the spectrum arrays and ``D`` is the stable secant
slope ``(g(xref+x) - g(xref))/x``.
"""

import math
import os

import numpy as np

_PURE_ENV = os.environ.get("QATTRACT_PURE_PYTHON", "").strip().lower()
_FORCE_PURE = _PURE_ENV in ("1", "true", "yes", "on")

NUMBA_ENABLED = False
if not _FORCE_PURE:
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
        NUMBA_ENABLED = False

# Outcome codes shared with integrate.py
COMPLETED = 0
ESCAPED = 1
STEP_COLLAPSE = 2

# Classification labels shared with basin.py
ATTRACTED = 0
BLOWN_UP = 1
UNDECIDED = 2

# Dormand-Prince 5(4) tableau (propagate order 5, embedded order 4).
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)
# Quartic dense-output weights (columns: sigma, sigma^2, sigma^3, sigma^4).
_P = np.array(
    [
        [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0, -12715105075.0 / 11282082432.0],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0, 87487479700.0 / 32700410799.0],
        [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0, -10690763975.0 / 1880347072.0],
        [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0, 701980252875.0 / 199316789632.0],
        [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0],
        [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0],
    ]
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_MAX_STEPS = 200_000_000


def fpow(x, n):
    # repeated multiplication: bit-identical between the compiled and the
    # pure path (integer ** lowers to libm pow under CPython but not LLVM)
    acc = 1.0
    for _ in range(n):
        acc *= x
    return acc


def spec_eval(freqs, re, im, t):
    s = 0.0
    for k in range(freqs.shape[0]):
        s += re[k] * math.cos(freqs[k] * t) - im[k] * math.sin(freqs[k] * t)
    return s


def spec_eval_d(freqs, re, im, t):
    v = 0.0
    d = 0.0
    for k in range(freqs.shape[0]):
        c = math.cos(freqs[k] * t)
        s = math.sin(freqs[k] * t)
        v += re[k] * c - im[k] * s
        d += -re[k] * freqs[k] * s - im[k] * freqs[k] * c
    return v, d


def g_eval(g_kind, g_p, g_coeffs, x):
    if g_kind == 0:
        return fpow(x, 2 * g_p + 1)
    if g_kind == 1:
        return fpow(x, 2 * g_p)
    acc = 0.0
    for j in range(g_coeffs.shape[0] - 1, -1, -1):
        acc = acc * x + g_coeffs[j]
    return acc * x


def g_prime(g_kind, g_p, g_coeffs, x):
    if g_kind == 0:
        return (2 * g_p + 1) * fpow(x, 2 * g_p)
    if g_kind == 1:
        return (2 * g_p) * fpow(x, 2 * g_p - 1)
    acc = 0.0
    for j in range(g_coeffs.shape[0] - 1, -1, -1):
        acc = acc * x + (j + 1) * g_coeffs[j]
    return acc


def secant_mono(q, xi, x):
    # ((x+xi)^q - x^q)/xi expanded binomially: exact at xi == 0 (gives q x^{q-1}).
    s = 0.0
    c = 1.0
    for j in range(q):
        s += c * fpow(x, j) * fpow(xi, q - 1 - j)
        c = c * (q - j) / (j + 1.0)
    return s


def g_secant(g_kind, g_p, g_coeffs, xi, x):
    if g_kind == 0:
        return secant_mono(2 * g_p + 1, xi, x)
    if g_kind == 1:
        return secant_mono(2 * g_p, xi, x)
    s = 0.0
    for j in range(1, g_coeffs.shape[0] + 1):
        a = g_coeffs[j - 1]
        if a != 0.0:
            s += a * secant_mono(j, xi, x)
    return s


def field(mode, gamma, g_kind, g_p, g_coeffs, freqs, re, im, x, y, t):
    if mode == 0:
        f = spec_eval(freqs, re, im, t)
        return y, f - gamma * y - g_eval(g_kind, g_p, g_coeffs, x)
    xref = spec_eval(freqs, re, im, t)
    return y, -gamma * y - x * g_secant(g_kind, g_p, g_coeffs, x, xref)


def rk_step(mode, gamma, g_kind, g_p, g_coeffs, freqs, re, im, x, y, t, h, k):
    """One Dormand-Prince step from (x, y, t) with size h.

    ``k`` is a (7, 2) scratch array whose row 0 must hold the derivative at
    (x, y, t) on entry (FSAL).  Returns (x_new, y_new, err_norm_unscaled_x,
    err_y) with rows 1..6 of ``k`` filled.
    """
    ax = x + h * _A21 * k[0, 0]
    ay = y + h * _A21 * k[0, 1]
    k[1, 0], k[1, 1] = field(mode, gamma, g_kind, g_p, g_coeffs, freqs, re, im, ax, ay, t + _C2 * h)

    ax = x + h * (_A31 * k[0, 0] + _A32 * k[1, 0])
    ay = y + h * (_A31 * k[0, 1] + _A32 * k[1, 1])
    k[2, 0], k[2, 1] = field(mode, gamma, g_kind, g_p, g_coeffs, freqs, re, im, ax, ay, t + _C3 * h)

    ax = x + h * (_A41 * k[0, 0] + _A42 * k[1, 0] + _A43 * k[2, 0])
    ay = y + h * (_A41 * k[0, 1] + _A42 * k[1, 1] + _A43 * k[2, 1])
    k[3, 0], k[3, 1] = field(mode, gamma, g_kind, g_p, g_coeffs, freqs, re, im, ax, ay, t + _C4 * h)

    ax = x + h * (_A51 * k[0, 0] + _A52 * k[1, 0] + _A53 * k[2, 0] + _A54 * k[3, 0])
    ay = y + h * (_A51 * k[0, 1] + _A52 * k[1, 1] + _A53 * k[2, 1] + _A54 * k[3, 1])
    k[4, 0], k[4, 1] = field(mode, gamma, g_kind, g_p, g_coeffs, freqs, re, im, ax, ay, t + _C5 * h)

    ax = x + h * (_A61 * k[0, 0] + _A62 * k[1, 0] + _A63 * k[2, 0] + _A64 * k[3, 0] + _A65 * k[4, 0])
    ay = y + h * (_A61 * k[0, 1] + _A62 * k[1, 1] + _A63 * k[2, 1] + _A64 * k[3, 1] + _A65 * k[4, 1])
    k[5, 0], k[5, 1] = field(mode, gamma, g_kind, g_p, g_coeffs, freqs, re, im, ax, ay, t + h)

    xn = x + h * (_B1 * k[0, 0] + _B3 * k[2, 0] + _B4 * k[3, 0] + _B5 * k[4, 0] + _B6 * k[5, 0])
    yn = y + h * (_B1 * k[0, 1] + _B3 * k[2, 1] + _B4 * k[3, 1] + _B5 * k[4, 1] + _B6 * k[5, 1])
    k[6, 0], k[6, 1] = field(mode, gamma, g_kind, g_p, g_coeffs, freqs, re, im, xn, yn, t + h)

    ex = h * (_E1 * k[0, 0] + _E3 * k[2, 0] + _E4 * k[3, 0] + _E5 * k[4, 0] + _E6 * k[5, 0] + _E7 * k[6, 0])
    ey = h * (_E1 * k[0, 1] + _E3 * k[2, 1] + _E4 * k[3, 1] + _E5 * k[4, 1] + _E6 * k[5, 1] + _E7 * k[6, 1])
    return xn, yn, ex, ey


def initial_step(mode, gamma, g_kind, g_p, g_coeffs, freqs, re, im, x, y, t, rtol, atol, max_step, dx, dy):
    sx = atol + rtol * abs(x)
    sy = atol + rtol * abs(y)
    d0 = math.sqrt(0.5 * ((x / sx) ** 2 + (y / sy) ** 2))
    d1 = math.sqrt(0.5 * ((dx / sx) ** 2 + (dy / sy) ** 2))
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    x1 = x + h0 * dx
    y1 = y + h0 * dy
    ex, ey = field(mode, gamma, g_kind, g_p, g_coeffs, freqs, re, im, x1, y1, t + h0)
    d2 = math.sqrt(0.5 * (((ex - dx) / sx) ** 2 + ((ey - dy) / sy) ** 2)) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    h = min(100.0 * h0, h1)
    if h > max_step:
        h = max_step
    return h


def integrate_loop(
    mode,
    gamma,
    g_kind,
    g_p,
    g_coeffs,
    freqs,
    re,
    im,
    x0,
    y0,
    t0,
    t_max,
    rtol,
    atol,
    max_step,
    min_step,
    escape_radius,
    want_dense,
):
    """Adaptive integration storing every accepted step.

    Returns ``(ts, xs, ys, dense, n, outcome, t_out)`` where the first
    ``n`` entries of the sample arrays are valid and ``dense[i]`` holds the
    (2, 4) quartic interpolant weights for the step from ``ts[i]`` to
    ``ts[i+1]``: state(sigma) = state_i + h*(Q[:,0]*sigma + ... + Q[:,3]*sigma^4).
    """
    cap = 1024
    ts = np.empty(cap)
    xs = np.empty(cap)
    ys = np.empty(cap)
    if want_dense:
        dense = np.empty((cap, 2, 4))
    else:
        dense = np.empty((1, 2, 4))

    k = np.empty((7, 2))
    x = x0
    y = y0
    t = t0
    n = 0
    ts[0] = t
    xs[0] = x
    ys[0] = y
    n = 1
    outcome = COMPLETED
    t_out = t_max

    if math.sqrt(x * x + y * y) > escape_radius:
        return ts, xs, ys, dense, n, ESCAPED, t0
    if t0 >= t_max:
        return ts, xs, ys, dense, n, COMPLETED, t0

    dx, dy = field(mode, gamma, g_kind, g_p, g_coeffs, freqs, re, im, x, y, t)
    h = initial_step(mode, gamma, g_kind, g_p, g_coeffs, freqs, re, im, x, y, t, rtol, atol, max_step, dx, dy)
    k[0, 0] = dx
    k[0, 1] = dy

    steps = 0
    while t < t_max:
        steps += 1
        if steps > _MAX_STEPS:
            outcome = STEP_COLLAPSE
            t_out = t
            break
        if h > max_step:
            h = max_step
        if t + h > t_max:
            h = t_max - t
        if h < min_step:
            outcome = STEP_COLLAPSE
            t_out = t
            break

        xn, yn, ex, ey = rk_step(mode, gamma, g_kind, g_p, g_coeffs, freqs, re, im, x, y, t, h, k)
        sx = atol + rtol * max(abs(x), abs(xn))
        sy = atol + rtol * max(abs(y), abs(yn))
        err = math.sqrt(0.5 * ((ex / sx) ** 2 + (ey / sy) ** 2))

        if err <= 1.0:  # accept (NaN fails the comparison and rejects)
            if n >= cap - 1:
                cap2 = cap * 2
                ts2 = np.empty(cap2)
                xs2 = np.empty(cap2)
                ys2 = np.empty(cap2)
                ts2[:n] = ts[:n]
                xs2[:n] = xs[:n]
                ys2[:n] = ys[:n]
                ts, xs, ys = ts2, xs2, ys2
                if want_dense:
                    dense2 = np.empty((cap2, 2, 4))
                    dense2[: n - 1] = dense[: n - 1]
                    dense = dense2
                cap = cap2
            if want_dense:
                for i in range(2):
                    for j in range(4):
                        q = 0.0
                        for s in range(7):
                            q += k[s, i] * _P[s, j]
                        dense[n - 1, i, j] = h * q
            t = t + h
            x = xn
            y = yn
            ts[n] = t
            xs[n] = x
            ys[n] = y
            n += 1
            k[0, 0] = k[6, 0]
            k[0, 1] = k[6, 1]
            if math.sqrt(x * x + y * y) > escape_radius:
                outcome = ESCAPED
                t_out = t
                break
            if err == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = min(_MAX_FACTOR, _SAFETY * err ** (-0.2))
                if factor < 1.0:
                    factor = 1.0
            h = h * factor
        else:
            if err > 0.0 and math.isfinite(err):
                factor = max(_MIN_FACTOR, _SAFETY * err ** (-0.2))
            else:
                factor = _MIN_FACTOR
            h = h * factor

    return ts, xs, ys, dense, n, outcome, t_out


def classify_loop(
    gamma,
    g_kind,
    g_p,
    g_coeffs,
    f_freqs,
    f_re,
    f_im,
    s_freqs,
    s_re,
    s_im,
    x0,
    y0,
    t0,
    t_max,
    rtol,
    atol,
    max_step,
    min_step,
    escape_radius,
    dist_tol,
    window,
):
    """Label one initial condition: ATTRACTED / BLOWN_UP / UNDECIDED.

    Attraction requires the time-synchronized distance to the spectral
    solution to stay below ``dist_tol`` at every accepted step over one
    full ``window`` of time.  Escape and step collapse both count as
    blow-up evidence.  Returns (label, t_decide).
    """
    x = x0
    y = y0
    t = t0
    if math.sqrt(x * x + y * y) > escape_radius:
        return BLOWN_UP, t0
    if t0 >= t_max:
        return UNDECIDED, t0

    k = np.empty((7, 2))
    dx, dy = field(0, gamma, g_kind, g_p, g_coeffs, f_freqs, f_re, f_im, x, y, t)
    h = initial_step(0, gamma, g_kind, g_p, g_coeffs, f_freqs, f_re, f_im, x, y, t, rtol, atol, max_step, dx, dy)
    k[0, 0] = dx
    k[0, 1] = dy

    in_window = False
    w_start = t0
    xs, xds = spec_eval_d(s_freqs, s_re, s_im, t)
    if math.sqrt((x - xs) ** 2 + (y - xds) ** 2) < dist_tol:
        in_window = True

    steps = 0
    while t < t_max:
        steps += 1
        if steps > _MAX_STEPS:
            return BLOWN_UP, t
        if h > max_step:
            h = max_step
        if t + h > t_max:
            h = t_max - t
        if h < min_step:
            return BLOWN_UP, t

        xn, yn, ex, ey = rk_step(0, gamma, g_kind, g_p, g_coeffs, f_freqs, f_re, f_im, x, y, t, h, k)
        sx = atol + rtol * max(abs(x), abs(xn))
        sy = atol + rtol * max(abs(y), abs(yn))
        err = math.sqrt(0.5 * ((ex / sx) ** 2 + (ey / sy) ** 2))

        if err <= 1.0:
            t = t + h
            x = xn
            y = yn
            k[0, 0] = k[6, 0]
            k[0, 1] = k[6, 1]
            if math.sqrt(x * x + y * y) > escape_radius:
                return BLOWN_UP, t
            xs, xds = spec_eval_d(s_freqs, s_re, s_im, t)
            if math.sqrt((x - xs) ** 2 + (y - xds) ** 2) < dist_tol:
                if not in_window:
                    in_window = True
                    w_start = t
                elif t - w_start >= window:
                    return ATTRACTED, t
            else:
                in_window = False
            if err == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = min(_MAX_FACTOR, _SAFETY * err ** (-0.2))
                if factor < 1.0:
                    factor = 1.0
            h = h * factor
        else:
            if err > 0.0 and math.isfinite(err):
                factor = max(_MIN_FACTOR, _SAFETY * err ** (-0.2))
            else:
                factor = _MIN_FACTOR
            h = h * factor

    return UNDECIDED, t_max


def hexagon_contains(two_p, f_pow, F_pow, lam1, lam2, y_top, y_bot, x, y, tol):
    if x < -f_pow - tol or x > F_pow + tol:
        return False
    if x <= 0.0:
        up = y_top
    else:
        up = lam1 * (fpow(F_pow, two_p) - fpow(x, two_p))
    if x >= 0.0:
        lo = y_bot
    else:
        lo = lam2 * (fpow(f_pow, two_p) - fpow(x + 2.0 * f_pow, two_p))
    return (y <= up + tol) and (y >= lo - tol)


def stay_in_hexagon_loop(
    gamma,
    g_kind,
    g_p,
    g_coeffs,
    f_freqs,
    f_re,
    f_im,
    two_p,
    f_pow,
    F_pow,
    lam1,
    lam2,
    y_top,
    y_bot,
    x0,
    y0,
    t0,
    t_max,
    rtol,
    atol,
    max_step,
    min_step,
    escape_radius,
    tol,
):
    """Integrate and flag the first excursion beyond ``tol`` outside the
    hexagonal region.  Returns (stayed, t_exit)."""
    x = x0
    y = y0
    t = t0
    if not hexagon_contains(two_p, f_pow, F_pow, lam1, lam2, y_top, y_bot, x, y, tol):
        return False, t0

    k = np.empty((7, 2))
    dx, dy = field(0, gamma, g_kind, g_p, g_coeffs, f_freqs, f_re, f_im, x, y, t)
    h = initial_step(0, gamma, g_kind, g_p, g_coeffs, f_freqs, f_re, f_im, x, y, t, rtol, atol, max_step, dx, dy)
    k[0, 0] = dx
    k[0, 1] = dy

    steps = 0
    while t < t_max:
        steps += 1
        if steps > _MAX_STEPS:
            return False, t
        if h > max_step:
            h = max_step
        if t + h > t_max:
            h = t_max - t
        if h < min_step:
            return False, t

        xn, yn, ex, ey = rk_step(0, gamma, g_kind, g_p, g_coeffs, f_freqs, f_re, f_im, x, y, t, h, k)
        sx = atol + rtol * max(abs(x), abs(xn))
        sy = atol + rtol * max(abs(y), abs(yn))
        err = math.sqrt(0.5 * ((ex / sx) ** 2 + (ey / sy) ** 2))

        if err <= 1.0:
            t = t + h
            x = xn
            y = yn
            k[0, 0] = k[6, 0]
            k[0, 1] = k[6, 1]
            if math.sqrt(x * x + y * y) > escape_radius:
                return False, t
            if not hexagon_contains(two_p, f_pow, F_pow, lam1, lam2, y_top, y_bot, x, y, tol):
                return False, t
            if err == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = min(_MAX_FACTOR, _SAFETY * err ** (-0.2))
                if factor < 1.0:
                    factor = 1.0
            h = h * factor
        else:
            if err > 0.0 and math.isfinite(err):
                factor = max(_MIN_FACTOR, _SAFETY * err ** (-0.2))
            else:
                factor = _MIN_FACTOR
            h = h * factor

    return True, t_max


_KERNEL_NAMES = (
    "fpow",
    "spec_eval",
    "spec_eval_d",
    "g_eval",
    "g_prime",
    "secant_mono",
    "g_secant",
    "field",
    "rk_step",
    "initial_step",
    "integrate_loop",
    "classify_loop",
    "hexagon_contains",
    "stay_in_hexagon_loop",
)

PURE_KERNELS = {name: globals()[name] for name in _KERNEL_NAMES}

if NUMBA_ENABLED:
    for _name in _KERNEL_NAMES:
        globals()[_name] = njit(cache=True, nogil=True)(PURE_KERNELS[_name])


def warm_up():
    """Trigger JIT compilation of every kernel on tiny inputs."""
    freqs = np.array([0.0, 1.0, -1.0])
    re = np.array([1.0, 0.1, 0.1])
    im = np.array([0.0, -0.05, 0.05])
    gc = np.empty(0)
    integrate_loop(0, 5.0, 0, 1, gc, freqs, re, im, 0.5, 0.0, 0.0, 0.1, 1e-9, 1e-11, 1.0, 1e-13, 1e6, True)
    integrate_loop(1, 5.0, 0, 1, gc, freqs, re, im, 0.5, 0.0, 0.0, 0.1, 1e-9, 1e-11, 1.0, 1e-13, 1e6, False)
    classify_loop(
        5.0, 0, 1, gc, freqs, re, im, freqs, re, im, 0.5, 0.0, 0.0, 0.1, 1e-9, 1e-11, 1.0, 1e-13, 1e6, 1e-6, 1.0
    )
    stay_in_hexagon_loop(
        5.0, 1, 1, gc, freqs, re, im, 2, 1.0, 2.0, 2.0, 2.0, 8.0, -6.0,
        0.5, 0.0, 0.0, 0.1, 1e-9, 1e-11, 1.0, 1e-13, 1e6, 1e-6,
    )
    g_prime(2, 1, np.array([1.0, 0.5]), 0.3)
    spec_eval(freqs, re, im, 0.3)
