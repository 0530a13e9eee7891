import numpy as np
import pytest
from scipy import linalg

from gklab.potential import (PotentialParams, v_double_prime, standing_wave,
                             interface_shape, noise_strength)
from gklab.profile import solve_two_layer_profile
from gklab.spectral import (assemble_operator, ground_eigenvalue, sl_matrix,
                            semigroup_apply, heat_semigroup, TorusShape,
                            mode_covariance, covariance_mode_sum,
                            covariance_double_integral, sup_norm_growth_bound)

POT = PotentialParams.from_gamma(0.8)


@pytest.fixture(scope="module")
def grid64():
    return solve_two_layer_profile(POT, 64.0)


@pytest.fixture(scope="module")
def sl64(grid64):
    return assemble_operator(grid64, 1024)


class TestAssembly:
    def test_symmetric_and_orthonormal(self, sl64):
        vecs = sl64.eigenvectors
        gram = sl64.h * (vecs.T @ vecs)
        assert np.max(np.abs(gram - np.eye(gram.shape[0]))) < 1e-8

    def test_annihilates_profile_slope(self, grid64, sl64):
        theta, h, mat = sl_matrix(grid64, 1024)
        slope = grid64.derivative(theta)
        res = mat @ slope
        assert np.linalg.norm(res) <= 1e-4 * np.linalg.norm(slope)

    def test_ground_state_is_translation_mode(self, grid64, sl64):
        slope = grid64.derivative(sl64.theta)
        slope /= np.sqrt(sl64.h * np.dot(slope, slope))
        overlap = sl64.h * np.dot(slope, sl64.psi0)
        assert overlap > 0.999

    def test_lambda0_small_and_quartering(self, grid64):
        lams = [ground_eigenvalue(grid64, M) for M in (1024, 2048, 4096)]
        assert abs(lams[1]) <= 1e-3
        for a, b in zip(lams, lams[1:]):
            assert abs(b) == pytest.approx(abs(a) / 4.0, rel=0.1)

    def test_doublet_and_bulk_gap(self, sl64):
        # the even partner sits above the translation mode by an
        # exponentially small split; the rest of the spectrum is O(1) below
        assert 0 < sl64.doublet_split < 0.5
        assert sl64.bulk_gap > 0.5

    def test_constant_coefficient_fourier_sanity(self, grid64):
        # with V'' frozen at rho_plus the eigenvalues are the exact Fourier
        # symbols -(2 pi k / sqrt(K))^2 - V''(rho_plus)
        M = 1024
        L = grid64.length
        h = L / M
        vpp = float(v_double_prime(POT.rho_plus, POT))
        diag = np.full(M, -2.0 / h ** 2 - vpp)
        off = np.full(M - 1, 1.0 / h ** 2)
        mat = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
        mat[0, -1] = mat[-1, 0] = 1.0 / h ** 2
        vals = np.sort(linalg.eigvalsh(mat))[::-1]
        for k in range(4):
            # discrete symbol of the three-point stencil
            exact = -(2.0 / h ** 2) * (1 - np.cos(2 * np.pi * k * h / L)) - vpp
            continuum = -(2 * np.pi * k / L) ** 2 - vpp
            idx = 2 * k if k > 0 else 0
            assert vals[idx] == pytest.approx(exact, abs=1e-10)
            assert abs(exact - continuum) < 1e-3


class TestSemigroup:
    def test_identity_at_time_zero(self, sl64):
        f = np.exp(-sl64.theta ** 2)
        assert np.max(np.abs(semigroup_apply(sl64, 0.0, f) - f)) < 1e-12

    def test_projection_in_odd_sector(self, grid64):
        # an odd-symmetrized function has no even-doublet component, so at
        # t K (bulk gap) >= 30 the semigroup collapses onto the ground mode
        sl = assemble_operator(grid64, 1024)
        L = grid64.length
        th = sl.theta
        g = np.exp(-((th - 0.4) ** 2) / 0.5)
        refl = L / 2 - th
        refl = np.mod(refl + L / 2, L) - L / 2
        f = g - np.exp(-((refl - 0.4) ** 2) / 0.5)
        t = 30.0 / (grid64.K * sl.bulk_gap)
        out = semigroup_apply(sl, t, f)
        proj = sl.project_ground(f)
        # the translation mode carries eigenvalue lambda0 ~ 1e-5; the floor
        # is the fp-level even-partner leakage amplified by exp(t K lambda1)
        scale = np.exp(t * grid64.K * sl.lambda0)
        assert sl.norm(out - scale * proj) <= 1e-7 * sl.norm(f)

    def test_decay_envelope(self, sl64, grid64):
        K = grid64.K
        for fshape in (np.exp(-sl64.theta ** 2),
                       np.exp(-(sl64.theta - 0.5) ** 2 / 0.8),
                       np.abs(np.sin(2 * np.pi * sl64.theta / grid64.length))):
            norm_f = sl64.norm(fshape)
            for t in (0.01, 0.05, 0.1, 0.3):
                out = semigroup_apply(sl64, t, fshape)
                dist = sl64.norm(out - sl64.project_ground(fshape))
                bound = np.exp(t * K * (sl64.lambda1 - sl64.lambda0)) * norm_f
                assert dist <= bound * (1 + 1e-6)

    def test_sup_norm_growth_bound(self, sl64, grid64):
        c5 = sup_norm_growth_bound(POT)
        f = np.exp(-2.0 * sl64.theta ** 2)
        for t in (0.01, 0.05, 0.2):
            out = semigroup_apply(sl64, t, f)
            assert np.max(np.abs(out)) <= np.exp((c5 * grid64.K + 1) * t) * \
                np.max(np.abs(f))

    def test_negative_time_guard(self, sl64):
        with pytest.raises(ValueError):
            semigroup_apply(sl64, -0.1, np.zeros(1024))


class TestHeatSemigroup:
    def test_constant_unchanged(self):
        vals = np.full(64, 2.5)
        assert np.allclose(heat_semigroup(vals, 0.3), 2.5, atol=1e-14)

    def test_single_mode_decay(self):
        M = 128
        theta = np.arange(M) / M - 0.5
        vals = np.cos(2 * np.pi * theta)
        out = heat_semigroup(vals, 0.05)
        assert np.allclose(out, np.exp(-4 * np.pi ** 2 * 0.05) * vals,
                           atol=1e-12)

    def test_mass_conserved(self):
        rng = np.random.default_rng(0)
        vals = rng.standard_normal(64)
        out = heat_semigroup(vals, 0.2)
        assert out.mean() == pytest.approx(vals.mean(), abs=1e-14)


class TestTorusShape:
    def test_coincides_on_inner_half(self, grid64):
        ek = TorusShape(64.0, POT)
        e = interface_shape(standing_wave(POT))
        th = np.linspace(-2.0, 2.0, 101)
        assert np.allclose(ek(th), e(th), atol=1e-15)

    def test_periodic_and_even(self):
        ek = TorusShape(64.0, POT)
        th = np.linspace(-3.99, 3.99, 201)
        assert np.allclose(ek(th), ek(-th), atol=1e-14)
        assert np.allclose(ek(th), ek(th + 8.0), atol=1e-14)

    def test_smooth_at_seam(self):
        ek = TorusShape(64.0, POT)
        h = 1e-5
        for th0 in (4.0, -4.0, 2.0):      # seam and blend edge
            d_left = (ek(th0) - ek(th0 - h)) / h
            d_right = (ek(th0 + h) - ek(th0)) / h
            assert d_left == pytest.approx(d_right, abs=1e-4)

    def test_derivative_consistency(self):
        ek = TorusShape(64.0, POT)
        th = np.linspace(-3.9, 3.9, 301)
        h = 1e-6
        fd = (ek(th + h) - ek(th - h)) / (2 * h)
        assert np.max(np.abs(fd - ek.derivative(th))) < 1e-6
        h = 1e-4
        fd2 = (ek(th + h) - 2 * ek(th) + ek(th - h)) / h ** 2
        assert np.max(np.abs(fd2 - ek.second_derivative(th))) < 1e-5

    def test_comparability_constants(self):
        e = interface_shape(standing_wave(POT))
        for K in (64.0, 256.0):
            ek = TorusShape(K, POT)
            L = np.sqrt(K)
            th = np.linspace(1e-9, L / 2 - 1e-9, 4001)
            for f_ek, f_e, cap in ((ek, e, 2.5),
                                   (ek.derivative, e.derivative, 4.0),
                                   (ek.second_derivative, e.second_derivative, 4.0)):
                num = np.abs(f_ek(th))
                den = np.abs(f_e(th))
                mask = den > 1e-280
                assert np.max(num[mask] / den[mask]) <= cap

    def test_ground_state_distance_decreasing_in_K(self):
        dists = []
        for K in (64.0, 256.0, 1024.0):
            g = solve_two_layer_profile(POT, K)
            sl = assemble_operator(g, 1024)
            ek = TorusShape(K, POT)
            dists.append(sl.norm(sl.psi0 - ek(sl.theta)))
        assert dists[0] > dists[1] > dists[2]


class TestLimitCovariances:
    def test_mode_zero_is_brownian(self):
        vp = 1.37
        assert mode_covariance(0, 0.2, 0.6, vp) == pytest.approx(vp * 0.2)

    def test_stationary_ou_variance(self):
        vp = 0.9
        k = 2
        t = 50.0
        target = vp / (8 * np.pi ** 2 * k ** 2)
        assert mode_covariance(k, t, t, vp) == pytest.approx(target, rel=1e-12)

    def test_ou_closed_form_vs_quadrature(self):
        # independent oracle: numerically integrate the OU covariance kernel
        vp, k, s, t = 1.1, 1, 0.22, 0.31
        a = 4 * np.pi ** 2 * k ** 2
        r = np.linspace(0, s, 200_001)
        ref = vp * np.trapezoid(np.exp(-a * (t - r)) * np.exp(-a * (s - r)), r)
        assert mode_covariance(k, s, t, vp) == pytest.approx(ref, rel=1e-8)

    def test_time_order_guard(self):
        with pytest.raises(ValueError):
            mode_covariance(1, 0.5, 0.2, 1.0)

    def test_mode_sum_equals_double_integral(self):
        # the two independent evaluations of the d=2 covariance
        vp = noise_strength(POT)
        M = 256
        theta = np.arange(M) / M - 0.5
        cases = [
            (1.0 + 0.5 * np.cos(2 * np.pi * theta),
             1.0 - 0.3 * np.sin(2 * np.pi * theta), 0.15, 0.35),
            (np.cos(4 * np.pi * theta), np.cos(4 * np.pi * theta), 0.2, 0.2),
            (np.ones(M), np.cos(2 * np.pi * theta + 0.4), 0.1, 0.5),
        ]
        for f_theta, g_theta, s, t in cases:
            route1 = covariance_double_integral(f_theta, g_theta, s, t, POT,
                                                r_nodes=160)
            f_modes = np.fft.fft(f_theta) / M
            g_modes = np.fft.fft(g_theta) / M
            route2 = covariance_mode_sum(f_modes, g_modes, s, t, vp)
            assert route1 == pytest.approx(route2, rel=1e-8, abs=1e-12)

    def test_projection_residual_decreases_in_K(self):
        # discrete analogue of the semigroup-to-shape convergence: the
        # time-integrated distance between the evolved derivative and the
        # shape projection shrinks along the ladder (rate reported only)
        e = interface_shape(standing_wave(POT))
        vals = []
        for K in (64.0, 256.0):
            g = solve_two_layer_profile(POT, K)
            sl = assemble_operator(g, 1024)
            F = np.exp(-sl.theta ** 2)
            fe = np.trapezoid(F * e(sl.theta), sl.theta)
            ek = TorusShape(K, POT)
            dek = ek.derivative(sl.theta)
            total = 0.0
            for t in np.linspace(0.02, 0.4, 12):
                out = semigroup_apply(sl, t, F)
                dout = np.gradient(out, sl.h)
                total += sl.h * np.sum((dout - fe * dek) ** 2)
            vals.append(total)
        assert vals[1] < vals[0]
