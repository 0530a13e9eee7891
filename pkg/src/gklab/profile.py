"""Two-layer stationary profile on the torus of length sqrt(K) and its
lattice discretizations.

The profile solves rho'' = V'(rho) with period sqrt(K), crosses 1/2 exactly
twice, and is normalized by rho(0) = 1/2 with negative slope.  The solver
works through the first integral (1/2) rho'^2 - V(rho) = E: for the cubic
reaction term the orbit is a Jacobi elliptic function, and the period of the
closed orbit is a complete elliptic integral.  A scalar root-find matches the
period to sqrt(K); the resulting evaluators are exact up to the tolerance of
the root-find, which keeps every downstream residual study clean.

In spin variables w = 2 rho - 1 the orbit is w(x) = -w_in sn(g w_out x | m)
with m = (w_in/w_out)^2, where +-w_in are the inner turning points and
+-w_out the outer roots of V(w) = -E.
"""

import csv
import json
import numpy as np
from dataclasses import dataclass
from scipy import optimize, special

from .potential import PotentialParams, v, v_prime, mean_flip_rate, _check_density


class ProfileError(RuntimeError):
    pass


def minimal_period(p: PotentialParams):
    """Shortest period of any closed orbit: the harmonic limit 2 pi / sqrt(2(2g-1)).

    Orbits of rho'' = V'(rho) around rho_star have periods increasing from
    this value to infinity (heteroclinic limit), so a two-layer profile on the
    torus of length sqrt(K) exists iff sqrt(K) exceeds it.
    """
    return 2.0 * np.pi / np.sqrt(2.0 * (2.0 * p.gamma - 1.0))


def _orbit_roots(p: PotentialParams, m):
    """Turning points (w_in, w_out) of the orbit with elliptic parameter m.

    w_in^2 + w_out^2 = 2(2g-1)/g^2 and w_in^2 = m w_out^2.
    """
    g = p.gamma
    w_out_sq = 2.0 * (2.0 * g - 1.0) / (g * g * (1.0 + m))
    w_out = np.sqrt(w_out_sq)
    return np.sqrt(m) * w_out, w_out


def _period(p: PotentialParams, m):
    """Period of the closed orbit with parameter m: 4 K(m) / (g w_out)."""
    _, w_out = _orbit_roots(p, m)
    ellip_k = special.ellipkm1(1.0 - m) if m > 0.5 else special.ellipk(m)
    return 4.0 * ellip_k / (p.gamma * w_out)


@dataclass(frozen=True)
class ProfileGrid:
    """Sampled two-layer profile plus exact evaluators.

    theta runs over a uniform grid of [-sqrt(K)/2, sqrt(K)/2); rho and drho
    are the profile and its slope on that grid.  h2_scaled is the second
    crossing of 1/2 (at sqrt(K)/2 for the symmetric well).  energy is the
    first-integral constant E.
    """

    params: PotentialParams
    K: float
    theta: np.ndarray
    rho: np.ndarray
    drho: np.ndarray
    energy: float
    h2_scaled: float
    elliptic_m: float

    @property
    def length(self):
        return np.sqrt(self.K)

    def __call__(self, theta):
        """Evaluate rho^K at arbitrary points of the torus (exact, elliptic)."""
        w_in, w_out = _orbit_roots(self.params, self.elliptic_m)
        u = self.params.gamma * w_out * np.asarray(theta, dtype=float)
        sn, _, _, _ = special.ellipj(u, self.elliptic_m)
        return 0.5 - 0.5 * w_in * sn

    def derivative(self, theta):
        """Exact slope d rho^K / d theta."""
        w_in, w_out = _orbit_roots(self.params, self.elliptic_m)
        scale = self.params.gamma * w_out
        u = scale * np.asarray(theta, dtype=float)
        _, cn, dn, _ = special.ellipj(u, self.elliptic_m)
        return -0.5 * w_in * scale * cn * dn

    def second_derivative(self, theta):
        """rho'' = V'(rho) along the orbit."""
        return v_prime(self(theta), self.params)

    @property
    def minimum(self):
        w_in, _ = _orbit_roots(self.params, self.elliptic_m)
        return 0.5 - 0.5 * w_in

    @property
    def maximum(self):
        w_in, _ = _orbit_roots(self.params, self.elliptic_m)
        return 0.5 + 0.5 * w_in

    @property
    def layer_positions(self):
        """Extrema locations (m1, m2) = (sqrt(K)/4, 3 sqrt(K)/4) on [0, sqrt(K))."""
        return 0.25 * self.length, 0.75 * self.length

    def export_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["theta", "rho_K", "drho_K"])
            for t, r, dr in zip(self.theta, self.rho, self.drho):
                writer.writerow([f"{t:.17g}", f"{r:.17g}", f"{dr:.17g}"])

    def export_metadata(self, path, residual=None):
        meta = {
            "gamma": self.params.gamma,
            "K": self.K,
            "energy": self.energy,
            "h2": self.h2_scaled / self.length,
            "elliptic_m": self.elliptic_m,
            "rho_min": float(self.minimum),
            "rho_max": float(self.maximum),
        }
        if residual is not None:
            meta["stationarity_residual"] = residual
        with open(path, "w") as fh:
            json.dump(meta, fh, indent=2)


def solve_two_layer_profile(p: PotentialParams, K, grid_points=1024) -> ProfileGrid:
    """Periodic two-layer solution of rho'' = V'(rho) on the torus of length sqrt(K).

    The period of the orbit family is strictly increasing in the elliptic
    parameter m, from the harmonic value at m = 0 to infinity at m = 1, so a
    bracketed scalar root-find in log(1-m) settles the orbit.  Raises
    ProfileError when sqrt(K) is below the minimal period.
    """
    if grid_points < 512:
        raise ValueError("grid_points must be at least 512")
    target = np.sqrt(K)
    t_min = minimal_period(p)
    if target <= t_min * (1.0 + 1e-12):
        raise ProfileError(
            f"no two-layer profile: sqrt(K) = {target:.4f} does not exceed the "
            f"minimal orbit period {t_min:.4f} (need K > {t_min**2:.2f} at gamma = {p.gamma})")

    # Root-find in lam = -log(1 - m); the period grows ~ linearly in lam near
    # the heteroclinic, which keeps the bracket well conditioned for large K.
    def gap(lam):
        return _period(p, 1.0 - np.exp(-lam)) - target

    lo, hi = 1e-12, 40.0
    while gap(hi) < 0.0:
        hi *= 2.0
        if hi > 720.0:
            raise ProfileError("period root-find bracket exhausted")
    sol = optimize.brentq(gap, lo, hi, xtol=1e-15, rtol=8.9e-16, full_output=True)
    lam, res = sol
    if not res.converged:
        raise ProfileError(
            f"period root-find did not converge (bracket [{lo}, {hi}], last {lam})")
    m = 1.0 - np.exp(-lam)

    w_in, w_out = _orbit_roots(p, m)
    energy = p.gamma ** 2 * w_in ** 2 * w_out ** 2 / 8.0

    theta = (np.arange(grid_points) / grid_points - 0.5) * target
    scale = p.gamma * w_out
    sn, cn, dn, _ = special.ellipj(scale * theta, m)
    rho = 0.5 - 0.5 * w_in * sn
    drho = -0.5 * w_in * scale * cn * dn
    return ProfileGrid(params=p, K=float(K), theta=theta, rho=rho, drho=drho,
                       energy=float(energy), h2_scaled=0.5 * target,
                       elliptic_m=float(m))


def reference_wave_profile(grid: ProfileGrid, theta):
    """Piecewise standing-wave approximation of the profile on [0, sqrt(K)).

    Built from the heteroclinic wave phi: the branch through the origin on
    [0, m1], the reflected branch through h2 on [m1, m2], and the periodic
    image of the origin branch on [m2, sqrt(K)).  Not differentiable at the
    extrema m1, m2.
    """
    from .potential import standing_wave

    w = standing_wave(grid.params)
    L = grid.length
    t = np.mod(np.asarray(theta, dtype=float), L)
    m1, m2 = grid.layer_positions
    h2 = grid.h2_scaled
    out = np.empty_like(t)
    left = t <= m1
    mid = (t > m1) & (t <= m2)
    right = t > m2
    out[left] = w.phi(t[left])
    out[mid] = w.phi(h2 - t[mid])
    out[right] = w.phi(t[right] - L)
    return out


@dataclass(frozen=True)
class DiscreteProfile:
    """Lattice density profile u over the discrete torus, constant in
    coordinates 2..d.  Carries the cached centered-occupation helpers."""

    u: np.ndarray          # shape (N,), values along the first coordinate
    N: int
    d: int
    K: float
    params: PotentialParams

    @property
    def beta(self):
        return 2.0 * self.u - 1.0

    @property
    def chi(self):
        return self.u * (1.0 - self.u)

    @property
    def sites(self):
        return self.N ** self.d

    def value_at(self, x):
        """Profile value at a flat site index (coordinate 1 fastest)."""
        return self.u[x % self.N]

    def full(self):
        """Profile over all sites of the d-dimensional torus, flat-indexed."""
        reps = self.N ** (self.d - 1)
        return np.tile(self.u, reps)


def discretize_profile(grid: ProfileGrid, N, d=1) -> DiscreteProfile:
    """Sample the profile at the lattice points x sqrt(K)/N, x = 0..N-1.

    Evaluation uses the exact elliptic form rather than interpolation off the
    stored grid, so the lattice residuals keep their K^2/N^2 scaling down to
    solver precision.
    """
    if N < 8:
        raise ValueError("N must be at least 8")
    if d not in (1, 2):
        raise ValueError("d must be 1 or 2")
    x = np.arange(N)
    u = grid(x * grid.length / N)
    return DiscreteProfile(u=u, N=int(N), d=int(d), K=grid.K, params=grid.params)


def reaction_mean(profile: DiscreteProfile):
    """Exact product-measure expectation of the centered flip observable at
    every site: gamma (beta(x-1) + beta(x+1)) - beta(x)
    - gamma^2 beta(x-1) beta(x) beta(x+1)."""
    g = profile.params.gamma
    beta = profile.beta
    bm = np.roll(beta, 1)
    bp = np.roll(beta, -1)
    return g * (bm + bp) - beta - g * g * bm * beta * bp


def stationarity_residual(profile: DiscreteProfile):
    """max_x | Delta_N u(x) + K * E[flip observable at x] |.

    Delta_N is the discrete Laplacian with the N^2 scaling.  The profile
    cancels this to order K^2/N^2.
    """
    u = profile.u
    N = profile.N
    lap = N * N * (np.roll(u, 1) + np.roll(u, -1) - 2.0 * u)
    return float(np.max(np.abs(lap + profile.K * reaction_mean(profile))))


def constant_profile(rho, N, d, K, p: PotentialParams) -> DiscreteProfile:
    """Flat profile at density rho (handy reference case)."""
    r = float(_check_density(rho))
    return DiscreteProfile(u=np.full(N, r), N=int(N), d=int(d), K=float(K), params=p)
