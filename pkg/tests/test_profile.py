import json
import numpy as np
import pytest

from gklab.potential import PotentialParams, v, v_prime, v_double_prime, v_third
from gklab.profile import (solve_two_layer_profile, discretize_profile,
                           stationarity_residual, constant_profile,
                           reference_wave_profile, reaction_mean,
                           minimal_period, ProfileError, DiscreteProfile)
from gklab.identities import reaction_observable

P8 = PotentialParams.from_gamma(0.8)


@pytest.fixture(scope="module")
def grid64():
    return solve_two_layer_profile(P8, 64.0, grid_points=1024)


class TestSolver:
    def test_normalization(self, grid64):
        assert grid64(0.0) == pytest.approx(0.5, abs=1e-12)
        assert grid64.derivative(0.0) < 0

    def test_periodicity(self, grid64):
        L = grid64.length
        th = np.linspace(-2, 2, 17)
        assert np.allclose(grid64(th), grid64(th + L), atol=1e-10)

    def test_exactly_two_crossings(self, grid64):
        # discard grid points sitting on the crossing to float noise, then
        # count sign changes around the cycle
        vals = grid64.rho - 0.5
        signs = np.sign(vals[np.abs(vals) > 1e-9])
        crossings = np.sum(signs != np.roll(signs, 1))
        assert crossings == 2
        assert grid64(grid64.h2_scaled) == pytest.approx(0.5, abs=1e-10)

    def test_strict_bounds(self, grid64):
        assert P8.rho_minus < grid64.minimum
        assert grid64.maximum < P8.rho_plus

    def test_ode_residual_finite_difference(self):
        # central second differences on a grid fine enough that the h^2
        # truncation of the oracle sits below the 1e-6 target
        g = solve_two_layer_profile(P8, 64.0, grid_points=4096)
        h = g.theta[1] - g.theta[0]
        lap = (np.roll(g.rho, -1) - 2 * g.rho + np.roll(g.rho, 1)) / h ** 2
        assert np.max(np.abs(lap - v_prime(g.rho, P8))) < 1e-6

    def test_energy_conservation(self, grid64):
        energy = 0.5 * grid64.drho ** 2 - v(grid64.rho, P8)
        spread = energy.max() - energy.min()
        assert spread < 1e-8 * max(abs(grid64.energy), 1e-3)

    def test_reflection_symmetry(self, grid64):
        m1, m2 = grid64.layer_positions
        s = np.linspace(0, 1.5, 40)
        assert np.allclose(grid64(m1 + s), grid64(m1 - s), atol=1e-10)
        assert np.allclose(grid64(m2 + s), grid64(m2 - s), atol=1e-10)

    def test_minimal_K_guard(self):
        with pytest.raises(ProfileError):
            solve_two_layer_profile(P8, 16.0)
        with pytest.raises(ProfileError):
            solve_two_layer_profile(P8, minimal_period(P8) ** 2)

    def test_grid_points_guard(self):
        with pytest.raises(ValueError):
            solve_two_layer_profile(P8, 64.0, grid_points=100)

    def test_wave_comparison_ladder(self):
        # sup |rho^K - wave profile| decreasing in K and below K^{-1/4}
        sups = []
        for K in (64.0, 256.0, 1024.0):
            g = solve_two_layer_profile(P8, K)
            th = np.mod(g.theta, g.length)
            sup = np.max(np.abs(g.rho - reference_wave_profile(g, th)))
            sups.append(sup)
            assert sup <= 1.0 * K ** (-0.25)
        assert sups[0] > sups[1] > sups[2]

    def test_extremes_approach_wells(self):
        gaps = []
        for K in (64.0, 256.0, 1024.0):
            g = solve_two_layer_profile(PotentialParams.from_gamma(0.8), K)
            gaps.append(P8.rho_plus - g.maximum)
            assert gaps[-1] > 0
        assert gaps[0] > gaps[1] > gaps[2]

    def test_derivative_bounds_uniform_in_K(self):
        # |d^j rho| for j <= 4 stays below the standing-wave constants,
        # uniformly along the ladder (the sups approach them from below)
        from gklab.potential import standing_wave

        w = standing_wave(P8)
        x = np.linspace(-30, 30, 200_001)
        phi, dphi = w.phi(x), w.dphi(x)
        caps = np.array([
            np.max(np.abs(dphi)),
            np.max(np.abs(v_prime(phi, P8))),
            np.max(np.abs(v_double_prime(phi, P8) * dphi)),
            np.max(np.abs(v_third(phi, P8) * dphi ** 2
                          + v_double_prime(phi, P8) * v_prime(phi, P8))),
        ])
        for K in (64.0, 256.0, 1024.0):
            g = solve_two_layer_profile(P8, K)
            r, dr = g.rho, g.drho
            d2 = v_prime(r, P8)
            d3 = v_double_prime(r, P8) * dr
            d4 = v_third(r, P8) * dr ** 2 + v_double_prime(r, P8) * d2
            bounds = np.array([np.max(np.abs(v)) for v in (dr, d2, d3, d4)])
            assert np.all(bounds <= caps * 1.02)

    def test_export(self, grid64, tmp_path):
        csv_path = tmp_path / "profile.csv"
        json_path = tmp_path / "profile.json"
        grid64.export_csv(csv_path)
        grid64.export_metadata(json_path, residual=1e-3)
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "theta,rho_K,drho_K"
        assert len(lines) == 1 + grid64.theta.size
        meta = json.loads(json_path.read_text())
        assert meta["gamma"] == 0.8
        assert meta["h2"] == pytest.approx(0.5)


class TestDiscretization:
    def test_values_and_normalization(self, grid64):
        prof = discretize_profile(grid64, 128, 1)
        assert prof.u[0] == pytest.approx(0.5, abs=1e-12)
        assert np.all((prof.u > 0) & (prof.u < 1))

    def test_constant_along_transverse(self, grid64):
        prof = discretize_profile(grid64, 16, 2)
        full = prof.full().reshape(16, 16)
        assert np.allclose(full, full[0][None, :])

    def test_neighbor_increment_bound(self, grid64):
        prof = discretize_profile(grid64, 256, 1)
        inc = np.max(np.abs(np.diff(prof.u)))
        bound = np.max(np.abs(grid64.drho)) * grid64.length / 256
        assert inc <= bound * 1.02

    def test_guards(self, grid64):
        with pytest.raises(ValueError):
            discretize_profile(grid64, 4, 1)
        with pytest.raises(ValueError):
            discretize_profile(grid64, 16, 3)


class TestStationarityResidual:
    def test_constant_critical_profile_is_exact(self):
        prof = constant_profile(P8.rho_plus, 64, 1, 16.0, P8)
        assert stationarity_residual(prof) < 1e-12

    def test_polynomial_vs_exhaustive_window(self, grid64):
        # the closed-form reaction mean against exhaustive enumeration over
        # the three-site window
        prof = discretize_profile(grid64, 64, 1)
        h0 = reaction_observable(P8)
        poly = reaction_mean(prof)
        for x in range(0, 64, 7):
            dens = {z: prof.value_at(x + z[0]) for z in h0.window}
            assert poly[x] == pytest.approx(h0.mean(dens), abs=1e-12)

    def test_scaling_slope_in_N(self, grid64):
        Ns = np.array([64, 128, 256, 512])
        res = np.array([stationarity_residual(discretize_profile(grid64, n, 1))
                        for n in Ns])
        slope = np.polyfit(np.log(Ns), np.log(res), 1)[0]
        assert -2.3 <= slope <= -1.7
