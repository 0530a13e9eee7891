"""Double-well potential, Glauber flip rates, standing wave and noise strength.

The spin-flip rate of the model is a three-site cylinder function with a
single parameter gamma.  Averaging it against Bernoulli product measures
produces a cubic reaction term V'(rho); for 1/2 < gamma <= 1 the
antiderivative V is a symmetric double well with minima rho_minus, rho_plus
and a local maximum at rho_star = 1/2.  The heteroclinic standing wave of
phi'' = V'(phi) connecting the two wells has an explicit tanh form, and its
normalized derivative is the interface shape that shows up in the
fluctuation limit.  The limit noise strength combines the exclusion
compressibility chi and the mean flip rate, both evaluated along the wave.
"""

import numpy as np
from dataclasses import dataclass
from scipy import integrate


class QuadratureError(RuntimeError):
    """Raised when an adaptive quadrature cannot reach the requested tolerance."""

    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved abs. error {achieved:.3e})")
        self.achieved = achieved


def _check_density(rho):
    r = np.asarray(rho, dtype=float)
    if np.any(r < 0.0) or np.any(r > 1.0):
        raise ValueError("density must lie in [0, 1]")
    return r


@dataclass(frozen=True)
class PotentialParams:
    """Flip-rate parameter gamma and the derived critical densities.

    rho_star = 1/2 always; rho_plus = 1/2 + sqrt(2 gamma - 1)/(2 gamma) and
    rho_minus = 1 - rho_plus are the two equal-depth minima of V.
    """

    gamma: float
    rho_minus: float
    rho_star: float
    rho_plus: float

    @classmethod
    def from_gamma(cls, gamma):
        if not 0.5 < gamma <= 1.0:
            raise ValueError(f"need 1/2 < gamma <= 1 for a double well, got {gamma}")
        rho_plus = 0.5 + np.sqrt(2.0 * gamma - 1.0) / (2.0 * gamma)
        return cls(gamma=float(gamma), rho_minus=1.0 - rho_plus,
                   rho_star=0.5, rho_plus=rho_plus)

    @property
    def well_separation(self):
        """2 rho_plus - 1 = sqrt(2 gamma - 1)/gamma, the spin-magnetization at the wells."""
        return 2.0 * self.rho_plus - 1.0


def v_prime(rho, p: PotentialParams):
    """Reaction term V'(rho) = -(2g-1)(2 rho - 1) + g^2 (2 rho - 1)^3."""
    r = _check_density(rho)
    g = p.gamma
    w = 2.0 * r - 1.0
    return -(2.0 * g - 1.0) * w + g * g * w ** 3


def v(rho, p: PotentialParams):
    """Potential V with the normalization V(rho_star) = 0.

    Antiderivative of v_prime in closed form:
    V(rho) = -((2g-1)/4) w^2 + (g^2/8) w^4 with w = 2 rho - 1.
    """
    r = _check_density(rho)
    g = p.gamma
    w = 2.0 * r - 1.0
    return -(2.0 * g - 1.0) / 4.0 * w ** 2 + g * g / 8.0 * w ** 4


def v_double_prime(rho, p: PotentialParams):
    """V''(rho) = -2(2g-1) + 6 g^2 (2 rho - 1)^2."""
    r = _check_density(rho)
    g = p.gamma
    w = 2.0 * r - 1.0
    return -2.0 * (2.0 * g - 1.0) + 6.0 * g * g * w ** 2


def v_third(rho, p: PotentialParams):
    """V'''(rho) = 24 g^2 (2 rho - 1)."""
    r = _check_density(rho)
    return 24.0 * p.gamma ** 2 * (2.0 * r - 1.0)


def flip_rate(sigma_minus, sigma0, sigma_plus, p: PotentialParams):
    """Spin-flip rate of the three-site window, in spin variables +-1.

    rate = 1 - gamma sigma0 (sigma- + sigma+) + gamma^2 sigma- sigma+,
    nonnegative for |gamma| <= 1.
    """
    g = p.gamma
    return 1.0 - g * sigma0 * (sigma_minus + sigma_plus) + g * g * sigma_minus * sigma_plus


def mean_flip_rate(rho, p: PotentialParams):
    """Expected flip rate under i.i.d. spins of density rho.

    With magnetization m = 2 rho - 1 this is 1 - (2 gamma - gamma^2) m^2.
    """
    r = _check_density(rho)
    g = p.gamma
    m = 2.0 * r - 1.0
    return 1.0 - (2.0 * g - g * g) * m ** 2


def chi(rho):
    """Static compressibility chi(rho) = rho (1 - rho) of the exclusion dynamics."""
    r = np.asarray(rho, dtype=float)
    return r * (1.0 - r)


@dataclass(frozen=True)
class StandingWave:
    """Decreasing heteroclinic solution of phi'' = V'(phi).

    phi(x) = 1/2 - (amplitude/2) tanh(decay * x), with
    amplitude = sqrt(2g-1)/gamma and decay = sqrt(2g-1).  phi(-inf) = rho_plus,
    phi(+inf) = rho_minus, phi(0) = 1/2.
    """

    amplitude: float
    decay: float
    params: PotentialParams

    def phi(self, x):
        return 0.5 - 0.5 * self.amplitude * np.tanh(self.decay * np.asarray(x, dtype=float))

    def dphi(self, x):
        s = 1.0 / np.cosh(self.decay * np.asarray(x, dtype=float))
        return -0.5 * self.amplitude * self.decay * s * s

    def d2phi(self, x):
        x = np.asarray(x, dtype=float)
        s = 1.0 / np.cosh(self.decay * x)
        return self.amplitude * self.decay ** 2 * s * s * np.tanh(self.decay * x)

    @property
    def dphi_l2_norm(self):
        """||phi'||_L2(R) in closed form, using int sech^4(b x) dx = 4/(3b)."""
        return 0.5 * self.amplitude * self.decay * np.sqrt(4.0 / (3.0 * self.decay))


def standing_wave(p: PotentialParams) -> StandingWave:
    """Construct the standing wave for the cubic reaction term of gamma."""
    if not 0.5 < p.gamma <= 1.0:
        raise ValueError("no double well (and no standing wave) for gamma <= 1/2")
    b = np.sqrt(2.0 * p.gamma - 1.0)
    return StandingWave(amplitude=b / p.gamma, decay=b, params=p)


@dataclass(frozen=True)
class InterfaceShape:
    """Normalized wave derivative e = phi' / ||phi'||_L2(R).

    e(x) = -(sqrt(3b)/2) sech^2(b x); it is negative, even in x, and has unit
    L2 norm.  This is the spatial profile of the limiting fluctuation field.
    """

    wave: StandingWave

    def __call__(self, x):
        b = self.wave.decay
        s = 1.0 / np.cosh(b * np.asarray(x, dtype=float))
        return -0.5 * np.sqrt(3.0 * b) * s * s

    def derivative(self, x):
        b = self.wave.decay
        x = np.asarray(x, dtype=float)
        s = 1.0 / np.cosh(b * x)
        return np.sqrt(3.0 * b) * b * s * s * np.tanh(b * x)

    def second_derivative(self, x):
        b = self.wave.decay
        x = np.asarray(x, dtype=float)
        s2 = 1.0 / np.cosh(b * x) ** 2
        t2 = np.tanh(b * x) ** 2
        # d/dx [ sqrt(3b) b sech^2 tanh ] = sqrt(3b) b^2 sech^2 (1 - 3 tanh^2) ... sign folded
        return -0.5 * np.sqrt(3.0 * b) * b * b * s2 * (4.0 * t2 - 2.0 * s2)


def interface_shape(w: StandingWave) -> InterfaceShape:
    """Normalized derivative of the standing wave (unit L2 norm, closed form)."""
    return InterfaceShape(wave=w)


def noise_strength(p: PotentialParams, abs_tol=1e-10):
    """Limit noise strength: the squared L2 norms of sqrt(2 chi(phi)) e' and
    sqrt(mean_flip_rate(phi)) e, summed.

    Computed by adaptive quadrature truncated where the integrands fall below
    1e-14; both integrands inherit the exponential tanh tails of the wave.
    """
    w = standing_wave(p)
    e = interface_shape(w)
    cut = 40.0 / w.decay

    def integrand(x):
        return (2.0 * chi(w.phi(x)) * e.derivative(x) ** 2
                + mean_flip_rate(w.phi(x), p) * e(x) ** 2)

    val, err = integrate.quad(integrand, -cut, cut, epsabs=abs_tol, epsrel=1e-12,
                              limit=400)
    if err > max(abs_tol, 1e-9 * abs(val)):
        raise QuadratureError("noise-strength quadrature did not converge", err)
    return val
