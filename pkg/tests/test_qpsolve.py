import json
import math

import numpy as np
import pytest

from qattract.errors import NewtonDiverged, SmallDivisorOverflow
from qattract.integrate import IntegratorSettings, integrate
from qattract.model import (
    ForcingSpectrum,
    FrequencyVector,
    Nonlinearity,
    PhaseState,
    SystemConfig,
    equilibrium,
    forcing_eval,
)
from qattract.qpsolve import (
    FourierLattice,
    FourierSolution,
    default_lattice,
    eval_many,
    eval_solution,
    harmonic_balance_solve,
    orbit_distance,
    perturbation_series,
    residual_report,
    write_solution_csv,
    write_summary_json,
)

from conftest import ALPHA_CUBE, kronecker_times

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0


class TestLattice:
    def test_graded_order_contains_zero_first(self):
        lat = FourierLattice.build(2, 3)
        assert lat.points[0] == (0, 0)
        norms = [sum(abs(n) for n in nu) for nu in lat.points]
        assert norms == sorted(norms)
        assert len(set(lat.points)) == len(lat.points)

    def test_mirror_indices(self):
        lat = FourierLattice.build(1, 4)
        mirror = lat.mirror_indices()
        for i, nu in enumerate(lat.points):
            assert lat.points[mirror[i]] == tuple(-n for n in nu)

    def test_default_truncations(self, varactor_cfg):
        assert default_lattice(varactor_cfg).N == 16
        forcing = ForcingSpectrum.from_modes(
            2, {(0, 0): 2.5, (1, 0): 0.1, (-1, 0): 0.1}
        )
        cfg2 = SystemConfig(
            forcing=forcing,
            freq=FrequencyVector((1.0, GOLDEN_RATIO), c0_dioph=0.3, tau=1.1),
            g=Nonlinearity.odd_monomial(1),
            gamma=12.0,
        )
        assert default_lattice(cfg2).N == 9


class TestHarmonicBalance:
    def test_constant_forcing_single_mode(self, const_odd_cfg, const_odd_sol):
        sol = const_odd_sol
        c0 = equilibrium(const_odd_cfg.g, 2.5)
        assert sol.mean == pytest.approx(c0, abs=1e-13)
        for nu, c in zip(sol.lattice.points, sol.coeffs):
            if nu != (0,):
                assert abs(c) < 1e-14

    def test_mean_and_first_harmonic_scaling(self, odd_cfg, odd_sol):
        # mean deviates from the equilibrium only at second order;
        # the first harmonic carries amplitude beta/gamma at first order
        gamma = odd_cfg.gamma
        assert abs(odd_sol.mean - ALPHA_CUBE) < 5.0 / gamma**2
        amp = 2.0 * abs(odd_sol.coeff((1,)))
        assert amp == pytest.approx(1.5 / gamma, rel=0.2)

    def test_long_integration_lands_on_solution(self, odd_cfg, odd_sol):
        # independent oracle: integrate the ODE and compare synchronously
        traj = integrate(odd_cfg, PhaseState(1.0, 0.0, 0.0), IntegratorSettings(t_max=60.0))
        assert traj.outcome.kind == "completed"
        assert orbit_distance(odd_sol, traj.final_state) < 1e-7

    def test_varactor_orbit_near_equilibrium_point(self, varactor_cfg, varactor_sol):
        c0 = equilibrium(varactor_cfg.g, 2.5)
        ts = np.linspace(0.0, 2.0 * math.pi, 512)
        x, xd = eval_many(varactor_sol, ts)
        assert np.max(np.hypot(x - c0, xd)) < 0.5

    def test_varactor_orbit_inside_hexagon(self, varactor_sol):
        from qattract.invariants import build_hexagon

        hexa = build_hexagon(1, 1.0, 2.0, 9.0)
        ts = np.linspace(0.0, 2.0 * math.pi, 1024)
        x, xd = eval_many(varactor_sol, ts)
        assert all(hexa.contains(float(a), float(b)) for a, b in zip(x, xd))

    def test_residual_certificate(self, varactor_cfg, varactor_sol):
        rep = residual_report(varactor_sol, varactor_cfg)
        rng = np.random.default_rng(3)
        ts = rng.uniform(0.0, 300.0, 1000)
        x, xd = eval_many(varactor_sol, ts)
        phases = np.exp(1j * np.outer(ts, varactor_sol.freqs))
        xdd = (phases @ (-(varactor_sol.freqs**2) * varactor_sol.coeffs)).real
        f = np.array([forcing_eval(varactor_cfg.forcing, varactor_cfg.freq, t) for t in ts])
        res = np.abs(xdd + varactor_cfg.gamma * xd + x**2 - f)
        assert res.max() <= 10.0 * varactor_sol.residual_norm + rep["envelope"] + 1e-12

    def test_uniqueness_probe(self, odd_cfg, odd_sol):
        rng = np.random.default_rng(17)
        lat = odd_sol.lattice
        mirror = lat.mirror_indices()
        agreed = 0
        for _ in range(20):
            noise = rng.normal(0.0, 0.5, len(lat)) + 1j * rng.normal(0.0, 0.5, len(lat))
            noise = 0.5 * (noise + np.conj(noise[mirror]))
            guess = FourierSolution(
                lattice=lat, coeffs=odd_sol.coeffs + noise, gamma=odd_cfg.gamma,
                residual_norm=math.inf, freqs=odd_sol.freqs,
            )
            try:
                sol = harmonic_balance_solve(odd_cfg, lat, guess=guess)
            except NewtonDiverged:
                continue
            agreed += 1
            assert np.max(np.abs(sol.coeffs - odd_sol.coeffs)) < 1e-8
        assert agreed >= 10

    def test_reality_symmetry_of_solution(self, varactor_sol):
        mirror = varactor_sol.lattice.mirror_indices()
        assert np.max(np.abs(varactor_sol.coeffs - np.conj(varactor_sol.coeffs[mirror]))) < 1e-12

    def test_two_frequency_solve(self):
        freq = FrequencyVector((1.0, GOLDEN_RATIO), c0_dioph=0.3, tau=1.1)
        forcing = ForcingSpectrum.from_modes(
            2, {(0, 0): 2.5, (1, 0): 0.25, (-1, 0): 0.25, (0, 1): 0.25, (0, -1): 0.25}
        )
        cfg = SystemConfig(forcing=forcing, freq=freq, g=Nonlinearity.odd_monomial(1), gamma=12.0)
        sol = harmonic_balance_solve(cfg)
        assert sol.residual_norm <= 1e-10 * 2.5
        assert sol.lattice.dim == 2
        assert abs(sol.mean - ALPHA_CUBE) < 0.05

    def test_newton_diverged_signals(self, freq1):
        # sign-dipping drive under the even nonlinearity at small
        # dissipation: no quasi-periodic response to converge to
        forcing = ForcingSpectrum.from_modes(1, {(0,): 0.5, (1,): -1.0j, (-1,): 1.0j})
        cfg = SystemConfig(forcing=forcing, freq=freq1, g=Nonlinearity.even_monomial(1), gamma=0.3)
        with pytest.raises(NewtonDiverged):
            harmonic_balance_solve(cfg)


class TestPerturbationSeries:
    def test_first_order_is_minus_beta_cosine(self, odd_cfg):
        # hand solution of the order-1 flow: x1(t) = -beta cos t, mean zero
        lat = FourierLattice.build(1, 8)
        series = perturbation_series(odd_cfg, lat, 2)
        x1 = series.terms[1]
        idx = series.lattice.index
        assert abs(x1[idx[(0,)]]) < 1e-12
        assert x1[idx[(1,)]] == pytest.approx(-0.75 + 0.0j, abs=1e-12)
        assert x1[idx[(-1,)]] == pytest.approx(-0.75 + 0.0j, abs=1e-12)
        ts = np.linspace(0.0, 2 * math.pi, 64)
        vals = np.array([series.term_eval(1, t) for t in ts])
        assert np.allclose(vals, -1.5 * np.cos(ts), atol=1e-12)

    def test_zero_order_is_equilibrium_only(self, odd_cfg):
        series = perturbation_series(odd_cfg, FourierLattice.build(1, 6), 1)
        x0 = series.terms[0]
        idx = series.lattice.index
        assert x0[idx[(0,)]] == pytest.approx(ALPHA_CUBE)
        assert np.sum(np.abs(x0)) == pytest.approx(ALPHA_CUBE, abs=1e-15)

    def test_constant_forcing_series_vanishes(self, const_odd_cfg):
        series = perturbation_series(const_odd_cfg, FourierLattice.build(1, 4), 3)
        for k in (1, 2, 3):
            assert np.max(np.abs(series.terms[k])) < 1e-12

    def test_first_order_against_large_gamma_fit(self, varactor_forcing, freq1):
        # oracle: (x0(t) - c0)/eps at gamma = 1000 approximates the
        # first-order term within O(eps)
        cfg = SystemConfig(forcing=varactor_forcing, freq=freq1, g=Nonlinearity.odd_monomial(1), gamma=1000.0)
        sol = harmonic_balance_solve(cfg)
        series = perturbation_series(cfg, FourierLattice.build(1, 8), 1)
        ts = np.linspace(0.0, 2 * math.pi, 256)
        x, _ = eval_many(sol, ts)
        fit = (x - ALPHA_CUBE) * cfg.gamma
        ref = np.array([series.term_eval(1, t) for t in ts])
        # remainder is eps * sup|second-order term| ~ 7.6e-3 here
        assert np.max(np.abs(fit - ref)) < 1.5e-2

    def test_second_order_consistency_slope(self, varactor_forcing, freq1):
        errs = []
        gammas = (50.0, 100.0, 200.0)
        lat = FourierLattice.build(1, 16)
        for gamma in gammas:
            cfg = SystemConfig(forcing=varactor_forcing, freq=freq1, g=Nonlinearity.odd_monomial(1), gamma=gamma)
            sol = harmonic_balance_solve(cfg)
            series = perturbation_series(cfg, lat, 2)
            ts = np.linspace(0.0, 2 * math.pi, 2048)
            x, _ = eval_many(sol, ts)
            partial = series.partial_sum(gamma, ts, upto=2)
            errs.append(np.max(np.abs(x - partial)))
        slope = np.polyfit(np.log([1.0 / g for g in gammas]), np.log(errs), 1)[0]
        assert 2.7 <= slope <= 3.3

    def test_small_divisor_guard(self, freq1):
        forcing = ForcingSpectrum.from_modes(1, {(0,): 2.5, (1,): 0.1, (-1,): 0.1})
        cfg = SystemConfig(
            forcing=forcing, freq=FrequencyVector((1e-13,)), g=Nonlinearity.odd_monomial(1), gamma=10.0
        )
        with pytest.raises(SmallDivisorOverflow):
            perturbation_series(cfg, FourierLattice.build(1, 4), 1)

    def test_two_frequency_series_matches_balance(self):
        # d = 2 with non-resonant frequencies: the order-1 expansion must
        # track the full solve to second order in the reciprocal dissipation
        freq = FrequencyVector((1.0, GOLDEN_RATIO), c0_dioph=0.3, tau=1.1)
        forcing = ForcingSpectrum.from_modes(
            2, {(0, 0): 2.5, (1, 0): 0.25, (-1, 0): 0.25, (0, 1): 0.25, (0, -1): 0.25}
        )
        cfg = SystemConfig(forcing=forcing, freq=freq, g=Nonlinearity.odd_monomial(1), gamma=60.0)
        sol = harmonic_balance_solve(cfg)
        series = perturbation_series(cfg, FourierLattice.build(2, 6), 1)
        ts = np.linspace(0.0, 40.0, 1024)
        x, _ = eval_many(sol, ts)
        first = series.partial_sum(cfg.gamma, ts, upto=1)
        assert np.max(np.abs(x - first)) < 20.0 / cfg.gamma**2

    def test_resonant_lattice_rejected_for_series(self):
        forcing = ForcingSpectrum.from_modes(2, {(0, 0): 2.5, (1, 0): 0.1, (-1, 0): 0.1})
        freq = FrequencyVector((1.0, 1.0 + 1e-9), c0_dioph=0.3, tau=1.5)
        cfg = SystemConfig(forcing=forcing, freq=freq, g=Nonlinearity.odd_monomial(1), gamma=10.0)
        with pytest.raises(ValueError, match="margin"):
            perturbation_series(cfg, FourierLattice.build(2, 4), 1)


class TestEvaluation:
    def test_constant_solution_eval(self, const_odd_sol):
        c0 = ALPHA_CUBE
        for t in (0.0, 1.3, 100.0):
            x, xd = eval_solution(const_odd_sol, t)
            assert x == pytest.approx(c0, abs=1e-12)
            assert xd == pytest.approx(0.0, abs=1e-12)

    def test_derivative_by_finite_differences(self, varactor_sol):
        h = 1e-5
        for t in (0.3, 2.1, 7.7):
            xm, _ = eval_solution(varactor_sol, t - h)
            xp, _ = eval_solution(varactor_sol, t + h)
            _, xd = eval_solution(varactor_sol, t)
            assert (xp - xm) / (2 * h) == pytest.approx(xd, rel=1e-6, abs=1e-9)

    def test_ergodic_mean_matches_zero_mode(self, varactor_sol):
        ts = kronecker_times(10_000, 2.0 * math.pi * 10_000)
        x, _ = eval_many(varactor_sol, ts)
        assert np.mean(x) == pytest.approx(varactor_sol.mean, abs=1e-4)
        # exact-period averaging pins it much tighter
        ts2 = np.linspace(0.0, 2.0 * math.pi, 4096, endpoint=False)
        x2, _ = eval_many(varactor_sol, ts2)
        assert np.mean(x2) == pytest.approx(varactor_sol.mean, abs=1e-8)

    def test_orbit_distance_translation(self, varactor_sol):
        x, xd = eval_solution(varactor_sol, 1.0)
        assert orbit_distance(varactor_sol, PhaseState(x, xd, 1.0)) < 1e-12
        assert orbit_distance(varactor_sol, PhaseState(x + 1e-3, xd, 1.0)) == pytest.approx(1e-3, abs=1e-12)


class TestExports:
    def test_solution_csv_and_summary(self, tmp_path, varactor_cfg, varactor_sol):
        csv_path = tmp_path / "solution.csv"
        json_path = tmp_path / "summary.json"
        write_solution_csv(varactor_sol, csv_path)
        write_summary_json(varactor_sol, varactor_cfg, json_path)
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "nu_1,re,im"
        assert len(lines) == len(varactor_sol.lattice) + 1
        summary = json.loads(json_path.read_text())
        assert set(summary) == {"gamma", "residual_norm", "mean", "c0"}
        assert summary["gamma"] == 9.0
        assert summary["c0"] == pytest.approx(math.sqrt(2.5))
