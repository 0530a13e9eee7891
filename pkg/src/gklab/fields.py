"""Fluctuation fields: the anisotropic scaling map, cell averages of test
functions, the centered and rescaled empirical field, and density profiles.

Test functions are smooth, compactly supported products of a profile in the
interface-normal coordinate and (in d=2) a Fourier factor on the transverse
circle.  The lattice pairing uses cell averages of the test function over the
image cells of the scaling map, evaluated by fixed-order Gauss product
quadrature, so Riemann-sum bounds hold uniformly in the lattice size.
"""

import numpy as np
from dataclasses import dataclass
from scipy import integrate

from .potential import PotentialParams, chi, standing_wave, interface_shape
from .profile import DiscreteProfile
from .lattice import Configuration
from .spectral import covariance_mode_sum, mode_covariance


def scale_map(x, N, K, d=1):
    """Image of flat lattice sites under the anisotropic scaling: the first
    coordinate is stretched to the torus of length sqrt(K), the others to the
    unit torus.  Returns an array of shape (len(x), d)."""
    x = np.atleast_1d(np.asarray(x, dtype=np.int64))
    out = np.empty((x.size, d))
    root_k = np.sqrt(K)
    for j in range(1, d + 1):
        coord = (x // N ** (j - 1)) % N
        centered = ((coord + N // 2) % N) - N // 2
        out[:, j - 1] = centered * (root_k / N if j == 1 else 1.0 / N)
    return out


# --- profile factors in the interface-normal coordinate ---

@dataclass(frozen=True)
class GaussianBump:
    """exp(-(x-center)^2 / (2 width^2)); support truncated at 8 widths."""
    center: float = 0.0
    width: float = 1.0

    @property
    def support(self):
        return self.center - 8.0 * self.width, self.center + 8.0 * self.width

    def __call__(self, x):
        u = (np.asarray(x, dtype=float) - self.center) / self.width
        return np.where(np.abs(u) <= 8.0, np.exp(-0.5 * u * u), 0.0)

    def derivative(self, x):
        u = (np.asarray(x, dtype=float) - self.center) / self.width
        return np.where(np.abs(u) <= 8.0,
                        -u / self.width * np.exp(-0.5 * u * u), 0.0)


@dataclass(frozen=True)
class OddBump:
    """u exp(-u^2/2) with u = (x-center)/width: odd about its center, hence
    orthogonal to the (even) interface shape when centered at the layer."""
    center: float = 0.0
    width: float = 1.0

    @property
    def support(self):
        return self.center - 8.0 * self.width, self.center + 8.0 * self.width

    def __call__(self, x):
        u = (np.asarray(x, dtype=float) - self.center) / self.width
        return np.where(np.abs(u) <= 8.0, u * np.exp(-0.5 * u * u), 0.0)

    def derivative(self, x):
        u = (np.asarray(x, dtype=float) - self.center) / self.width
        return np.where(np.abs(u) <= 8.0,
                        (1.0 - u * u) / self.width * np.exp(-0.5 * u * u), 0.0)


@dataclass(frozen=True)
class CompactBump:
    """The standard smooth bump exp(1 - 1/(1-u^2)) on |u| < 1, identically
    zero outside; infinitely differentiable with genuinely compact support."""
    center: float = 0.0
    halfwidth: float = 1.0

    @property
    def support(self):
        return self.center - self.halfwidth, self.center + self.halfwidth

    def _u(self, x):
        return (np.asarray(x, dtype=float) - self.center) / self.halfwidth

    def __call__(self, x):
        u = self._u(x)
        inside = np.abs(u) < 1.0
        safe = np.where(inside, 1.0 - u * u, 1.0)
        return np.where(inside, np.exp(1.0 - 1.0 / safe), 0.0)

    def derivative(self, x):
        u = self._u(x)
        inside = np.abs(u) < 1.0
        safe = np.where(inside, 1.0 - u * u, 1.0)
        val = np.where(inside, np.exp(1.0 - 1.0 / safe), 0.0)
        return np.where(inside, val * (-2.0 * u / safe ** 2) / self.halfwidth, 0.0)


@dataclass(frozen=True)
class FourierFactor:
    """cos(2 pi k theta + phase) on the transverse unit circle."""
    k: int = 0
    phase: float = 0.0

    def __call__(self, theta):
        if self.k == 0 and self.phase == 0.0:
            return np.ones_like(np.asarray(theta, dtype=float))
        return np.cos(2.0 * np.pi * self.k * np.asarray(theta, dtype=float)
                      + self.phase)

    def derivative(self, theta):
        if self.k == 0:
            return np.zeros_like(np.asarray(theta, dtype=float))
        return -2.0 * np.pi * self.k * np.sin(
            2.0 * np.pi * self.k * np.asarray(theta, dtype=float) + self.phase)


PROFILE_FAMILIES = {"gaussian_bump": GaussianBump, "odd_bump": OddBump,
                    "compact_bump": CompactBump}


@dataclass(frozen=True)
class TestFunction:
    """Product test function F(x, theta) = profile(x) * factor(theta) with a
    compact support box in the interface-normal coordinate."""

    __test__ = False          # keep pytest collection away from the name

    profile_factor: object
    theta_factor: FourierFactor = FourierFactor(0, 0.0)
    name: str = "F"

    @property
    def support(self):
        return self.profile_factor.support

    def __call__(self, x, theta=None):
        val = self.profile_factor(x)
        if theta is not None:
            val = val * self.theta_factor(theta)
        return val

    def d_normal(self, x, theta=None):
        val = self.profile_factor.derivative(x)
        if theta is not None:
            val = val * self.theta_factor(theta)
        return val

    def d_transverse(self, x, theta):
        return self.profile_factor(x) * self.theta_factor.derivative(theta)

    def inner_with_shape(self, params: PotentialParams):
        """<profile factor, e> over the real line, by adaptive quadrature."""
        e = interface_shape(standing_wave(params))
        lo, hi = self.support
        val, _ = integrate.quad(lambda x: self.profile_factor(x) * e(x),
                                lo, hi, epsabs=1e-12, limit=200)
        return val

    def l2_norm_sq(self, d=1):
        lo, hi = self.support
        val, _ = integrate.quad(lambda x: self.profile_factor(x) ** 2, lo, hi,
                                epsabs=1e-13, limit=200)
        if d == 2:
            k = self.theta_factor.k
            val *= 1.0 if k == 0 else 0.5
        return val

    @classmethod
    def from_spec(cls, spec):
        """Build from a JSON-able dict: {family, name, params, theta_mode, phase}."""
        family = PROFILE_FAMILIES[spec["family"]]
        prof = family(**spec.get("params", {}))
        theta = FourierFactor(spec.get("theta_mode", 0), spec.get("phase", 0.0))
        return cls(profile_factor=prof, theta_factor=theta,
                   name=spec.get("name", spec["family"]))


_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(5)


def cell_average(F: TestFunction, x, N, K, d=1):
    """Mean of F over the image cell of site x under the scaling map,
    by fifth-order Gauss product quadrature (exact through degree 9)."""
    centers = scale_map(x, N, K, d)
    wx = np.sqrt(K) / N
    nx = centers[:, :1] + 0.5 * wx * _GAUSS_NODES[None, :]
    if d == 1:
        vals = F(nx)
        return 0.5 * vals @ _GAUSS_WEIGHTS
    wt = 1.0 / N
    nt = centers[:, 1:2] + 0.5 * wt * _GAUSS_NODES[None, :]
    prof = 0.5 * F.profile_factor(nx) @ _GAUSS_WEIGHTS
    fact = 0.5 * F.theta_factor(nt) @ _GAUSS_WEIGHTS
    return prof * fact


@dataclass
class BoundTestFunction:
    """Test function bound to a lattice geometry: cached support sites and
    cell averages, ready to pair with many snapshots."""

    F: TestFunction
    N: int
    d: int
    K: float
    sites: np.ndarray        # flat indices whose cells meet the support box
    fhat: np.ndarray         # cell averages at those sites

    @property
    def scale(self):
        return 1.0 / np.sqrt(self.N ** self.d * np.sqrt(self.K))

    def pair(self, omega_full):
        """Field value against a full centered-occupation array."""
        return self.scale * float(np.dot(self.fhat, omega_full[self.sites]))

    def variance_formula(self, profile: DiscreteProfile):
        """Exact product-measure variance of the time-zero field:
        (N^d sqrt(K))^{-1} sum fhat^2 chi(u)."""
        u = profile.full()[self.sites]
        return self.scale ** 2 * float(np.dot(self.fhat ** 2, chi(u)))


def bind(F: TestFunction, N, K, d=1) -> BoundTestFunction:
    """Resolve the support box to lattice sites and cache cell averages.

    Rejects supports reaching past a quarter of the stretched torus, where
    the identification of the real line with the torus stops being canonical.
    """
    lo, hi = F.support
    root_k = np.sqrt(K)
    if lo < -root_k / 4.0 or hi > root_k / 4.0:
        raise ValueError(
            f"support [{lo:.3g}, {hi:.3g}] exceeds [-sqrt(K)/4, sqrt(K)/4] "
            f"= [-{root_k/4:.3g}, {root_k/4:.3g}]")
    half_cell = 0.5 * root_k / N
    x1 = np.arange(N)
    centered = ((x1 + N // 2) % N) - N // 2
    pos = centered * root_k / N
    keep = (pos + half_cell >= lo) & (pos - half_cell <= hi)
    base = x1[keep]
    if d == 1:
        sites = base
    else:
        sites = (np.arange(N)[:, None] * N + base[None, :]).reshape(-1)
    fhat = cell_average(F, sites, N, K, d)
    nonzero = fhat != 0.0
    return BoundTestFunction(F=F, N=N, d=d, K=float(K),
                             sites=sites[nonzero], fhat=fhat[nonzero])


def fluctuation_field(config: Configuration, profile: DiscreteProfile,
                      F, K=None) -> float:
    """The centered, anisotropically rescaled empirical field paired with F:
    (N^d sqrt(K))^{-1/2} sum_x Fhat(Ax) (eta_x - u(x))."""
    bound = F if isinstance(F, BoundTestFunction) else \
        bind(F, profile.N, profile.K if K is None else K, profile.d)
    return bound.pair(config.omega_field(profile))


def theory_covariance(F: TestFunction, G: TestFunction, s, t,
                      params: PotentialParams, d=1, varpi=None,
                      theta_grid=256):
    """Covariance of the limit field: Brownian in d=1, stochastic-heat mode
    sum in d=2 (both through the shape-projected test functions)."""
    from .potential import noise_strength

    if varpi is None:
        varpi = noise_strength(params)
    fe = F.inner_with_shape(params)
    ge = G.inner_with_shape(params)
    if d == 1:
        return varpi * fe * ge * min(s, t)
    grid = np.arange(theta_grid) / theta_grid - 0.5
    f_modes = np.fft.fft(fe * F.theta_factor(grid)) / theta_grid
    g_modes = np.fft.fft(ge * G.theta_factor(grid)) / theta_grid
    s, t = min(s, t), max(s, t)
    return covariance_mode_sum(f_modes, g_modes, s, t, varpi)


def mean_density_profile(snapshots, profile: DiscreteProfile):
    """Per-site empirical mean over an ensemble of configurations, its
    deviation from the reference profile, and CLT bands.

    Returns a dict with the mean field, the max absolute deviation, the
    per-site band (3 sigma), the fraction of sites outside the band, and the
    interface position (first crossing of 1/2 near the origin, in stretched
    coordinates).
    """
    M = len(snapshots)
    if M < 2:
        raise ValueError("need at least two replicas")
    acc = np.zeros(profile.sites)
    for c in snapshots:
        acc += c.eta
    mean = acc / M
    u = profile.full()
    dev = mean - u
    band = 3.0 * np.sqrt(chi(u) / M)
    # interface position: zero crossing of the first-axis profile around 0
    line = mean.reshape(-1, profile.N).mean(axis=0) - 0.5
    root_k = np.sqrt(profile.K)
    pos = None
    for x in range(profile.N):
        a, b = line[x - 1], line[x]
        if a < 0.0 <= b or a >= 0.0 > b:
            centered = ((x + profile.N // 2) % profile.N) - profile.N // 2
            frac = a / (a - b) if a != b else 0.5
            cand = (centered - 1 + frac) * root_k / profile.N
            if pos is None or abs(cand) < abs(pos):
                pos = cand
    return {
        "mean": mean,
        "max_deviation": float(np.max(np.abs(dev))),
        "band": band,
        "outside_band_fraction": float(np.mean(np.abs(dev) > band)),
        "interface_position": pos,
    }
