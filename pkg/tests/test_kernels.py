"""Compiled-path / pure-path agreement and kernel-level checks."""

import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from qattract import _kernels

_WORKLOAD = r"""
import json
import numpy as np
from qattract import _kernels

freqs = np.array([0.0, 1.0, -1.0])
re = np.array([2.5, 0.0, 0.0])
im = np.array([0.0, -0.75, 0.75])
gc = np.empty(0)

ts, xs, ys, dense, n, outcome, t_out = _kernels.integrate_loop(
    0, 9.0, 1, 1, gc, freqs, re, im, 0.2, 1.0, 0.0, 8.0,
    1e-9, 1e-11, 0.5, 1e-13, 1e6, True)
lab, t_dec = _kernels.classify_loop(
    9.0, 1, 1, gc, freqs, re, im, freqs, re, im, -10.0, -5.0, 0.0, 30.0,
    1e-9, 1e-11, 0.25, 1e-13, 1e6, 1e-6, 6.283185307179586)
print(json.dumps({
    "numba": _kernels.NUMBA_ENABLED,
    "n": int(n),
    "x_end": float(xs[n-1]),
    "y_end": float(ys[n-1]),
    "t_end": float(ts[n-1]),
    "dense_sum": float(np.sum(dense[:n-1])),
    "label": int(lab),
    "t_dec": float(t_dec),
    "F": float(_kernels.g_secant(0, 1, gc, 1.0, 1.0)),
    "field": list(_kernels.field(1, 9.0, 0, 1, gc, freqs, re, im, 0.5, -0.25, 0.33)),
}))
"""


def _run_workload(pure: bool) -> dict:
    env = dict(os.environ)
    if pure:
        env["QATTRACT_PURE_PYTHON"] = "1"
    else:
        env.pop("QATTRACT_PURE_PYTHON", None)
    proc = subprocess.run([sys.executable, "-c", _WORKLOAD], env=env,
                          capture_output=True, text=True, timeout=600)
    assert proc.returncode == 0, proc.stderr
    return json.loads(proc.stdout.strip().splitlines()[-1])


class TestPureFallbackEquivalence:
    def test_env_flag_selects_pure_path_with_identical_results(self):
        fast = _run_workload(pure=False)
        slow = _run_workload(pure=True)
        assert fast["numba"] is True
        assert slow["numba"] is False
        for key in ("n", "x_end", "y_end", "t_end", "dense_sum", "label", "t_dec", "F", "field"):
            assert fast[key] == slow[key], key


class TestKernelPieces:
    def test_spectral_eval_matches_closed_form(self):
        freqs = np.array([0.0, 1.0, -1.0])
        re = np.array([2.5, 0.0, 0.0])
        im = np.array([0.0, -0.75, 0.75])
        for t in (0.0, 0.7, math.pi / 2.0, 13.0):
            assert _kernels.spec_eval(freqs, re, im, t) == pytest.approx((5 + 3 * math.sin(t)) / 2, abs=1e-12)
            v, d = _kernels.spec_eval_d(freqs, re, im, t)
            assert d == pytest.approx(1.5 * math.cos(t), abs=1e-12)

    def test_g_eval_families(self):
        gc = np.empty(0)
        assert _kernels.g_eval(0, 2, gc, 2.0) == 32.0
        assert _kernels.g_eval(1, 1, gc, -3.0) == 9.0
        poly = np.array([1.0, 0.0, 2.0])  # x + 2 x^3
        assert _kernels.g_eval(2, 1, poly, 2.0) == 18.0
        assert _kernels.g_prime(2, 1, poly, 2.0) == 1.0 + 6.0 * 4.0

    def test_secant_slope_binomial(self):
        gc = np.empty(0)
        assert _kernels.g_secant(0, 1, gc, 1.0, 1.0) == 7.0
        assert _kernels.g_secant(1, 1, gc, 2.0, 1.0) == 4.0
        assert _kernels.g_secant(0, 1, gc, 0.0, 2.0) == 12.0  # g'(2) for x^3

    def test_hexagon_contains_matches_python_reference(self):
        from qattract.invariants import build_hexagon

        hexa = build_hexagon(1, 1.0, 2.0, 9.0)
        rng = np.random.default_rng(1)
        for _ in range(500):
            x = rng.uniform(-1.5, 2.5)
            y = rng.uniform(-8.0, 10.0)
            ref = (
                -1.0 <= x <= 2.0
                and y <= (hexa.y_top if x <= 0 else hexa.upper_arc(x))
                and y >= (hexa.y_bot if x >= 0 else hexa.lower_arc(x))
            )
            assert hexa.contains(x, y) == ref

    def test_escape_radius_stops_integration(self):
        freqs = np.array([0.0])
        re = np.array([2.5])
        im = np.array([0.0])
        gc = np.empty(0)
        ts, xs, ys, dense, n, outcome, t_out = _kernels.integrate_loop(
            0, 9.0, 1, 1, gc, freqs, re, im, -10.0, -5.0, 0.0, 100.0,
            1e-9, 1e-11, 1.0, 1e-13, 1e6, False)
        assert outcome in (_kernels.ESCAPED, _kernels.STEP_COLLAPSE)
        assert t_out < 100.0
