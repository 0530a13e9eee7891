import numpy as np
import pytest
from itertools import product
from scipy import integrate
from scipy.integrate import solve_ivp
from hypothesis import given, settings, strategies as st

from gklab.potential import (PotentialParams, v, v_prime, v_double_prime,
                             flip_rate, mean_flip_rate, chi, standing_wave,
                             interface_shape, noise_strength)

GAMMAS = [0.51, 0.6, 0.7, 0.75, 0.8, 0.9, 1.0]


def params(g):
    return PotentialParams.from_gamma(g)


class TestCriticalDensities:
    def test_rho_star_is_half(self):
        for g in GAMMAS:
            assert params(g).rho_star == 0.5

    def test_wells_are_critical_points(self):
        for g in GAMMAS:
            p = params(g)
            assert abs(v_prime(p.rho_minus, p)) < 1e-12
            assert abs(v_prime(p.rho_star, p)) < 1e-12
            assert abs(v_prime(p.rho_plus, p)) < 1e-12

    def test_equal_well_depth(self):
        for g in GAMMAS:
            p = params(g)
            assert abs(v(p.rho_minus, p) - v(p.rho_plus, p)) < 1e-12

    def test_symmetry_and_formula(self):
        p = params(0.75)
        assert p.rho_plus == pytest.approx(0.5 + np.sqrt(0.5) / 1.5)
        assert p.rho_minus == pytest.approx(1.0 - p.rho_plus)

    def test_gamma_guard(self):
        with pytest.raises(ValueError):
            PotentialParams.from_gamma(0.5)
        with pytest.raises(ValueError):
            PotentialParams.from_gamma(1.2)


class TestReactionTerm:
    def test_odd_at_center(self):
        for g in GAMMAS:
            assert v_prime(0.5, params(g)) == 0.0

    def test_stable_density_at_gamma_one(self):
        p = params(1.0)
        assert v_prime(1.0, p) == pytest.approx(-1.0 + 1.0, abs=1e-14)

    def test_rho_plus_root_numeric(self):
        p = params(0.75)
        rho_plus = 0.5 + np.sqrt(0.5) / 1.5
        assert abs(v_prime(rho_plus, p)) < 1e-14

    def test_domain_error(self):
        p = params(0.8)
        with pytest.raises(ValueError):
            v_prime(-0.1, p)
        with pytest.raises(ValueError):
            v(1.1, p)

    def test_antiderivative_vs_quadrature(self):
        p = params(0.75)
        for rho in (0.1, 0.3, 0.62, p.rho_plus, 0.97):
            ref, _ = integrate.quad(lambda s: v_prime(s, p), 0.5, rho,
                                    epsabs=1e-13)
            assert v(rho, p) == pytest.approx(ref, abs=1e-12)
        assert v(0.5, p) == 0.0
        assert v(p.rho_plus, p) < 0.0

    def test_second_derivative_values(self):
        for g in GAMMAS:
            p = params(g)
            assert v_double_prime(0.5, p) == pytest.approx(-2 * (2 * g - 1))
            assert v_double_prime(p.rho_plus, p) == pytest.approx(
                4 * (2 * g - 1), rel=1e-12)
            assert v_double_prime(p.rho_minus, p) == pytest.approx(
                4 * (2 * g - 1), rel=1e-12)

    def test_second_derivative_finite_difference(self):
        p = params(0.8)
        rng = np.random.default_rng(1)
        h = 1e-6
        for rho in rng.uniform(0.05, 0.95, size=20):
            fd = (v_prime(rho + h, p) - v_prime(rho - h, p)) / (2 * h)
            assert v_double_prime(rho, p) == pytest.approx(fd, abs=5e-7)


class TestFlipRate:
    def test_vanishes_on_aligned_spins_at_gamma_one(self):
        p = params(1.0)
        assert flip_rate(1, 1, 1, p) == 0.0
        assert flip_rate(-1, -1, -1, p) == 0.0

    def test_mixed_window(self):
        for g in GAMMAS:
            p = params(g)
            assert flip_rate(1, 1, -1, p) == pytest.approx(1 - g * g)

    def test_gamma_zero_limit(self):
        p = PotentialParams(gamma=0.0, rho_minus=0.0, rho_star=0.5, rho_plus=1.0)
        for spins in product((-1, 1), repeat=3):
            assert flip_rate(*spins, p) == 1.0

    def test_nonnegative_all_windows(self):
        for g in GAMMAS:
            p = params(g)
            for spins in product((-1, 1), repeat=3):
                assert flip_rate(*spins, p) >= 0.0

    @given(st.floats(min_value=0.0, max_value=1.0))
    @settings(max_examples=50, deadline=None)
    def test_nonnegative_property(self, g):
        p = PotentialParams(gamma=g, rho_minus=0.0, rho_star=0.5, rho_plus=1.0)
        for spins in product((-1, 1), repeat=3):
            assert flip_rate(*spins, p) >= -1e-15


def window_expectation(func, rho):
    """Exhaustive expectation of a 3-spin observable under Bernoulli(rho)."""
    total = 0.0
    for bits in product((0, 1), repeat=3):
        weight = np.prod([rho if b else 1 - rho for b in bits])
        total += weight * func(*[2 * b - 1 for b in bits])
    return total


class TestMeanFlipRate:
    def test_half_density(self):
        for g in GAMMAS:
            assert mean_flip_rate(0.5, params(g)) == 1.0

    def test_exhaustive_enumeration_oracle(self):
        p = params(0.8)
        for rho in (0.3, 0.5, 0.7, 0.9):
            ref = window_expectation(
                lambda sm, s0, sp: flip_rate(sm, s0, sp, p), rho)
            assert mean_flip_rate(rho, p) == pytest.approx(ref, abs=1e-14)

    def test_full_density_gamma_one(self):
        assert mean_flip_rate(1.0, params(1.0)) == pytest.approx(0.0, abs=1e-14)

    def test_reaction_term_is_mean_centered_rate(self):
        # -V'(rho) equals the expectation of the centered flip observable
        for g, rho in product((0.6, 0.8, 1.0), (0.2, 0.45, 0.5, 0.8)):
            p = params(g)
            ref = window_expectation(
                lambda sm, s0, sp: -s0 * flip_rate(sm, s0, sp, p), rho)
            assert -v_prime(rho, p) == pytest.approx(ref, abs=1e-13)


class TestStandingWave:
    def test_normalization(self):
        for g in GAMMAS:
            w = standing_wave(params(g))
            far = 200.0 / w.decay
            assert w.phi(0.0) == pytest.approx(0.5)
            assert w.phi(-far) == pytest.approx(params(g).rho_plus, abs=1e-12)
            assert w.phi(far) == pytest.approx(params(g).rho_minus, abs=1e-12)

    def test_strictly_decreasing(self):
        w = standing_wave(params(0.8))
        x = np.linspace(-10, 10, 1001)
        assert np.all(np.diff(w.phi(x)) < 0)

    def test_ode_residual(self):
        p = params(0.8)
        w = standing_wave(p)
        x = np.linspace(-10, 10, 2001)
        residual = w.d2phi(x) - v_prime(w.phi(x), p)
        assert np.max(np.abs(residual)) < 1e-8

    def test_shooting_oracle_second_order(self):
        # integrate the second-order ODE from the center with the slope fixed
        # by the first integral; the heteroclinic is exponentially unstable,
        # so this raw form only resolves 1e-6 for moderate decay rates
        for g in (0.6, 0.8):
            p = params(g)
            w = standing_wave(p)
            slope0 = -np.sqrt(-2.0 * v(p.rho_plus, p))

            def rhs(x, y):
                return [y[1], v_prime(np.clip(y[0], 0.0, 1.0), p)]

            for span, lo, hi in (((0, 10), 0, 10), ((0, -10), -10, 0)):
                sol = solve_ivp(rhs, span, [0.5, slope0], rtol=1e-12,
                                atol=1e-13, dense_output=True)
                xs = np.linspace(lo, hi, 400)
                assert np.max(np.abs(sol.sol(xs)[0] - w.phi(xs))) < 1e-6

    def test_shooting_oracle_first_order(self):
        # the first-integral reduction phi' = -sqrt(2 (V(phi) - V(rho+)))
        # contracts toward the tails, so it resolves every gamma
        for g in (0.6, 0.8, 0.9, 1.0):
            p = params(g)
            w = standing_wave(p)
            floor = v(p.rho_plus, p)

            def rhs(x, y):
                return [-np.sqrt(max(2.0 * (v(np.clip(y[0], 0, 1), p) - floor),
                                     0.0))]

            for span, lo, hi in (((0, 10), 0, 10), ((0, -10), -10, 0)):
                sol = solve_ivp(rhs, span, [0.5], rtol=1e-12, atol=1e-14,
                                dense_output=True)
                xs = np.linspace(lo, hi, 400)
                assert np.max(np.abs(sol.sol(xs)[0] - w.phi(xs))) < 1e-6

    def test_exponential_tails(self):
        # fitted decay rate of |phi'| at least 0.9 times the linearization
        # rate 2 sqrt(2g-1)
        for g in (0.6, 0.8, 1.0):
            w = standing_wave(params(g))
            x = np.linspace(3.0, 8.0, 200)
            slope = np.polyfit(x, np.log(np.abs(w.dphi(x))), 1)[0]
            assert -slope >= 0.9 * 2.0 * np.sqrt(2 * g - 1)

    def test_guard(self):
        bad = PotentialParams(gamma=0.4, rho_minus=0.2, rho_star=0.5,
                              rho_plus=0.8)
        with pytest.raises(ValueError):
            standing_wave(bad)


class TestInterfaceShape:
    def test_unit_norm(self):
        for g in (0.6, 0.8, 1.0):
            e = interface_shape(standing_wave(params(g)))
            norm, _ = integrate.quad(lambda x: e(x) ** 2, -60, 60,
                                     epsabs=1e-13, limit=300)
            assert norm == pytest.approx(1.0, abs=1e-10)

    def test_negative_everywhere(self):
        e = interface_shape(standing_wave(params(0.8)))
        x = np.linspace(-20, 20, 801)
        assert np.all(e(x) < 0)

    def test_closed_form_norm_vs_quadrature(self):
        for g in (0.6, 0.8, 1.0):
            w = standing_wave(params(g))
            ref, _ = integrate.quad(lambda x: w.dphi(x) ** 2, -60, 60,
                                    epsabs=1e-14, limit=300)
            assert w.dphi_l2_norm ** 2 == pytest.approx(ref, abs=1e-9)

    def test_derivatives_finite_difference(self):
        e = interface_shape(standing_wave(params(0.8)))
        x = np.linspace(-4, 4, 41)
        fd1 = (e(x + 1e-6) - e(x - 1e-6)) / 2e-6
        assert np.max(np.abs(fd1 - e.derivative(x))) < 1e-7
        h = 1e-4          # balances truncation against roundoff for fd2
        fd2 = (e(x + h) - 2 * e(x) + e(x - h)) / h ** 2
        assert np.max(np.abs(fd2 - e.second_derivative(x))) < 1e-6

    def test_even_symmetry(self):
        e = interface_shape(standing_wave(params(0.9)))
        x = np.linspace(0.1, 6, 60)
        assert np.allclose(e(x), e(-x), atol=1e-15)


class TestNoiseStrength:
    def test_positive(self):
        for g in GAMMAS:
            assert noise_strength(params(g)) > 0.0

    def test_dual_quadrature(self):
        from gklab.potential import mean_flip_rate as mfr
        for g in (0.6, 0.8, 0.95):
            p = params(g)
            w = standing_wave(p)
            e = interface_shape(w)
            cut = 40.0 / w.decay
            x = np.linspace(-cut, cut, 400_001)
            integrand = (2.0 * chi(w.phi(x)) * e.derivative(x) ** 2
                         + mfr(w.phi(x), p) * e(x) ** 2)
            ref = np.trapezoid(integrand, x)
            val = noise_strength(p)
            assert val == pytest.approx(ref, rel=1e-8)

    def test_translation_invariance(self):
        p = params(0.8)
        w = standing_wave(p)
        e = interface_shape(w)
        cut = 40.0 / w.decay
        vals = []
        for shift in (0.0, 1.7):
            x = np.linspace(-cut + shift, cut + shift, 400_001)
            integrand = (2.0 * chi(w.phi(x)) * e.derivative(x) ** 2
                         + mean_flip_rate(w.phi(x), p) * e(x) ** 2)
            vals.append(np.trapezoid(integrand, x))
        assert vals[0] == pytest.approx(vals[1], rel=1e-9)
