"""Exact algebraic identities of the generator against inhomogeneous product
measures.

Two families of objects live here.  First, the adjoint of the full generator
applied to the constant function decomposes into a linear part (discrete
Laplacian of the profile plus the reaction mean) and quadratic/cubic parts
with explicit site-coefficient tables; this identity is checked against a
brute-force adjoint on enumerable state spaces.  Second, cylinder functions
expand in the centered-occupation basis, splitting any local observable into
its mean, a linear term whose coefficient approaches -V''(u), and a remainder
of degree two and higher.  Everything here is exact at fixed N and verified
by exhaustive enumeration, no asymptotics involved.
"""

import numpy as np
from dataclasses import dataclass
from itertools import product

from .potential import PotentialParams, flip_rate, v_double_prime
from .profile import DiscreteProfile
from .lattice import Configuration, measure_weight, exchange_ratio, flip_ratio


# --- cylinder functions as coefficient maps over a finite window ---

@dataclass(frozen=True)
class CylinderFunction:
    """Local function of finitely many occupation variables.

    Stored as monomial coefficients over subsets of the window:
    f(eta) = sum_{B subset window} coeff[B] * prod_{z in B} eta_z.
    """

    window: tuple       # tuple of site offsets (each a d-tuple)
    coeff: dict         # frozenset of offsets -> float

    @classmethod
    def from_callable(cls, func, window):
        """Monomial coefficients by Moebius inversion over the window states:
        coeff(B) = sum_{A subset B} (-1)^{|B - A|} f(indicator of A)."""
        window = tuple(tuple(z) for z in window)
        values = {}
        for bits in product((0, 1), repeat=len(window)):
            occupied = frozenset(z for z, b in zip(window, bits) if b)
            values[occupied] = float(func(dict(zip(window, bits))))
        coeff = {}
        for b_bits in product((0, 1), repeat=len(window)):
            bset = frozenset(z for z, b in zip(window, b_bits) if b)
            total = 0.0
            for a_bits in product((0, 1), repeat=len(window)):
                aset = frozenset(z for z, b in zip(window, a_bits) if b)
                if aset <= bset:
                    total += (-1.0) ** (len(bset) - len(aset)) * values[aset]
            if total != 0.0:
                coeff[bset] = total
        return cls(window=window, coeff=coeff)

    def __call__(self, eta_window):
        """Evaluate on a dict offset -> occupation bit."""
        total = 0.0
        for bset, c in self.coeff.items():
            term = c
            for z in bset:
                term *= eta_window[z]
            total += term
        return total

    def mean(self, site_density):
        """Expectation under independent Bernoulli(site_density[z]) bits."""
        total = 0.0
        for bset, c in self.coeff.items():
            term = c
            for z in bset:
                term *= site_density[z]
            total += term
        return total


def reaction_observable(p: PotentialParams):
    """The centered flip observable (1 - 2 eta_0) * flip_rate on the three-site
    window along the first axis (offsets given in 1-d form)."""

    def func(eta):
        sm = 2 * eta[(-1,)] - 1
        s0 = 2 * eta[(0,)] - 1
        sp = 2 * eta[(1,)] - 1
        return (1 - 2 * eta[(0,)]) * flip_rate(sm, s0, sp, p)

    return CylinderFunction.from_callable(func, [(-1,), (0,), (1,)])


def _window_density(profile: DiscreteProfile, x, window):
    """Profile values on a translated window, keyed by offset (d=1 offsets)."""
    return {z: profile.value_at(x + z[0]) for z in window}


def high_degree_part(f: CylinderFunction, profile: DiscreteProfile, x):
    """Coefficients of the degree >= 2 remainder of the expansion of
    tau_x f in centered occupations.

    Returns a dict mapping subsets C (|C| >= 2) of the window to the
    coefficient sum_{C subset B} coeff(B) prod_{z in B - C} u(x + z).
    """
    dens = _window_density(profile, x, f.window)
    out = {}
    subsets = list(f.coeff.keys())
    all_c = set()
    for b in subsets:
        for r in range(2, len(b) + 1):
            from itertools import combinations
            for c in combinations(sorted(b), r):
                all_c.add(frozenset(c))
    for cset in all_c:
        total = 0.0
        for bset, cb in f.coeff.items():
            if cset <= bset:
                term = cb
                for z in bset - cset:
                    term *= dens[z]
                total += term
        if total != 0.0:
            out[cset] = total
    return out


def evaluate_expansion(terms, omega_window):
    """Evaluate a {subset: coeff} expansion on a dict offset -> omega value."""
    total = 0.0
    for cset, c in terms.items():
        term = c
        for z in cset:
            term *= omega_window[z]
        total += term
    return total


def linear_response_coefficient(f: CylinderFunction, profile: DiscreteProfile, x):
    """Coefficient of the centered linear term of tau_x f:
    sum_y E[ tau_x f * (eta_{x+y} - u(x+y)) / chi(x+y) ].

    Computed by exhaustive expectation over the window.  For the reaction
    observable and a constant profile this equals -V''(rho) exactly.
    """
    dens = _window_density(profile, x, f.window)
    total = 0.0
    for bits in product((0, 1), repeat=len(f.window)):
        eta_w = dict(zip(f.window, bits))
        weight = 1.0
        for z, b in eta_w.items():
            weight *= dens[z] if b else (1.0 - dens[z])
        fval = f(eta_w)
        score = 0.0
        for z, b in eta_w.items():
            uz = dens[z]
            score += (b - uz) / (uz * (1.0 - uz))
        total += weight * fval * score
    return total


def centered_reaction_gap(profile: DiscreteProfile, x):
    """(linear-response coefficient of the flip observable, -V''(u(x))) at x.

    The first entry approaches the second at rate sqrt(K)/N along the lattice
    profile; for a flat profile they agree exactly.
    """
    f = reaction_observable(profile.params)
    coeff = linear_response_coefficient(f, profile, x)
    return coeff, -v_double_prime(profile.value_at(x), profile.params)


def expansion_decomposition(f: CylinderFunction, profile: DiscreteProfile,
                            config: Configuration, x):
    """Exact split of tau_x f - E[tau_x f] into
    -V''(u(x)) omega_x + (degree >= 2 part) + remainder,
    each term computed from its own definition.  Returns the four numbers
    (centered value, linear term, high-degree term, remainder)."""
    dens = _window_density(profile, x, f.window)
    eta_w = {z: int(config.eta[(x + z[0]) % config.N]) for z in f.window}
    omega_w = {z: eta_w[z] - dens[z] for z in f.window}

    centered = f(eta_w) - f.mean(dens)
    vpp = v_double_prime(profile.value_at(x), profile.params)
    linear = -vpp * omega_w[(0,)]
    high = evaluate_expansion(high_degree_part(f, profile, x), omega_w)

    # Remainder per its definition: the off-site linear couplings plus the
    # gap between the linear-response coefficient and -V''(u(x)).
    coeffs = {z: 0.0 for z in f.window}
    for bits in product((0, 1), repeat=len(f.window)):
        ew = dict(zip(f.window, bits))
        weight = 1.0
        for z, b in ew.items():
            weight *= dens[z] if b else (1.0 - dens[z])
        fv = f(ew)
        for z, b in ew.items():
            uz = dens[z]
            coeffs[z] += weight * fv * (b - uz) / (uz * (1.0 - uz))
    drift = sum(coeffs[z] * (omega_w[z] - omega_w[(0,)]) for z in f.window)
    gap = sum(coeffs.values()) + vpp
    remainder = drift + gap * omega_w[(0,)]
    return centered, linear, high, remainder


# --- the adjoint identity ---

@dataclass(frozen=True)
class AdjointTables:
    """Site-coefficient tables of the adjoint identity for a given profile.

    linear: multiplies omega_x / chi(x) (includes the discrete Laplacian of
    the profile and K times the reaction mean); pair[j]: multiplies
    omega_x omega_{x+e_j}; triple: multiplies omega_{x-e1} omega_x omega_{x+e1}.
    """

    linear: np.ndarray
    pair: np.ndarray        # shape (d, sites)
    triple: np.ndarray
    K: float

    def check_transverse(self):
        """Profiles constant along axes 2..d have vanishing transverse pair
        coefficients."""
        return np.allclose(self.pair[1:], 0.0) if self.pair.shape[0] > 1 else True


def adjoint_tables(profile: DiscreteProfile, K) -> AdjointTables:
    """Assemble the coefficient tables entering the adjoint identity."""
    g = profile.params.gamma
    N, d = profile.N, profile.d
    u = profile.full()
    sites = u.size
    beta = 2.0 * u - 1.0
    chi = u * (1.0 - u)

    def shift(arr, j, sign):
        a = arr.reshape((N,) * d)
        return np.roll(a, -sign, axis=d - j).reshape(-1)

    bm = shift(beta, 1, -1)
    bp = shift(beta, 1, +1)
    bpp = shift(beta, 1, +2)
    chi_p1 = shift(chi, 1, +1)

    lap = np.zeros(sites)
    for j in range(1, d + 1):
        lap += N * N * (shift(u, j, +1) + shift(u, j, -1) - 2.0 * u)
    reaction = g * (bm + bp) - beta - g * g * bm * beta * bp
    linear = lap + K * reaction

    pair = np.zeros((d, sites))
    cross = 2.0 * g * (1.0 / chi + 1.0 / chi_p1) \
        - 2.0 * g * g * (bm * beta / chi + bp * bpp / chi_p1)
    for j in range(1, d + 1):
        uj = shift(u, j, +1)
        grad_sq = (uj - u) ** 2
        pair[j - 1] = -(N * N / K) * grad_sq / (chi * shift(chi, j, +1))
    pair[0] += cross

    triple = -4.0 * g * g * beta / chi
    return AdjointTables(linear=linear, pair=pair, triple=triple, K=float(K))


def adjoint_one(config: Configuration, profile: DiscreteProfile, K,
                tables: AdjointTables = None):
    """Value of the adjoint generator applied to the constant function 1,
    assembled from the coefficient tables."""
    if tables is None:
        tables = adjoint_tables(profile, K)
    N, d = profile.N, profile.d
    u = profile.full()
    chi = u * (1.0 - u)
    omega = config.eta.astype(float) - u

    def shift(arr, j, sign):
        a = arr.reshape((N,) * d)
        return np.roll(a, -sign, axis=d - j).reshape(-1)

    linear_part = float(np.dot(tables.linear, omega / chi))
    quad = 0.0
    for j in range(1, d + 1):
        quad += float(np.dot(tables.pair[j - 1], omega * shift(omega, j, +1)))
    quad += float(np.dot(tables.triple,
                         shift(omega, 1, -1) * omega * shift(omega, 1, +1)))
    return linear_part + K * quad


def brute_force_adjoint(profile: DiscreteProfile, K):
    """(adjoint generator applied to 1) on every configuration of a small
    torus, straight from the definition: for each move, the measure ratio
    times the rate of the reversed move minus the rate of the move.

    Returns a dict state-bytes -> value.  Guarded to d=1 and N <= 20 bits.
    """
    N, d = profile.N, profile.d
    if d != 1 or N > 20:
        raise ValueError("brute force is for d=1 and N <= 20")
    p = profile.params
    out = {}
    for bits in product((0, 1), repeat=N):
        eta = np.array(bits, dtype=np.uint8)
        config = Configuration(eta.copy(), N, 1)
        total = 0.0
        for x in range(N):
            y = (x + 1) % N
            if eta[x] != eta[y]:
                total += N * N * (exchange_ratio(profile, config, x, 1) - 1.0)
            sm = 2 * int(eta[(x - 1) % N]) - 1
            s0 = 2 * int(eta[x]) - 1
            sp = 2 * int(eta[(x + 1) % N]) - 1
            rate_here = flip_rate(sm, s0, sp, p)
            rate_flipped = flip_rate(sm, -s0, sp, p)
            total += K * (flip_ratio(profile, config, x) * rate_flipped - rate_here)
        out[eta.tobytes()] = total
    return out


def generator_matrix(profile: DiscreteProfile, K):
    """Dense generator matrix Q on the full state space of a small torus
    (rows: from-state), and the product-measure weights.  Oracle for both the
    adjoint identity and the exact process law."""
    N, d = profile.N, profile.d
    if d != 1 or N > 20:
        raise ValueError("generator matrix is for d=1 and N <= 20")
    p = profile.params
    states = [np.array(bits, dtype=np.uint8)
              for bits in product((0, 1), repeat=N)]
    index = {s.tobytes(): i for i, s in enumerate(states)}
    n = len(states)
    Q = np.zeros((n, n))
    for i, eta in enumerate(states):
        for x in range(N):
            y = (x + 1) % N
            if eta[x] != eta[y]:
                to = eta.copy()
                to[x], to[y] = to[y], to[x]
                Q[i, index[to.tobytes()]] += N * N
            sm = 2 * int(eta[(x - 1) % N]) - 1
            s0 = 2 * int(eta[x]) - 1
            sp = 2 * int(eta[(x + 1) % N]) - 1
            to = eta.copy()
            to[x] = 1 - to[x]
            Q[i, index[to.tobytes()]] += K * flip_rate(sm, s0, sp, p)
        Q[i, i] = -Q[i].sum()
    weights = np.array([measure_weight(profile, Configuration(s.copy(), N, 1))
                        for s in states])
    return Q, weights, states
