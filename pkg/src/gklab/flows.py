"""Discrete flows from the origin to block-average measures, and the
two-block decomposition of weighted cylinder sums.

A flow here is an antisymmetric nearest-neighbor bond function whose
divergence transports the Dirac mass at the origin onto the twice-convolved
uniform block measure.  Flows are built exactly in rational arithmetic (the
divergence identity is combinatorial, not approximate); their energy, which
controls two-block replacement costs, scales like ell in d=1 and log(ell) in
d=2.  The minimum-energy (electrical) flow is used in d >= 2, with an exact
rational repair pass so the divergence holds identically.
"""

import math

import numpy as np
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import NamedTuple

from scipy import optimize
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve


def block_weights(ell, d):
    """Uniform weights on the cube {0..ell-1}^d (dict offset -> Fraction)."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    w = Fraction(1, ell ** d)
    return {z: w for z in product(range(ell), repeat=d)}


def double_block_weights(ell, d):
    """Self-convolution of the uniform block measure: supported on
    {0..2(ell-1)}^d, product of per-axis triangles, sums to one."""
    tri = [Fraction(ell - abs(z - (ell - 1)), ell * ell) for z in range(2 * ell - 1)]
    return {z: math.prod(tri[c] for c in z)
            for z in product(range(2 * ell - 1), repeat=d)}


def double_block_array(ell, d):
    """double_block_weights as a float array of shape (2 ell - 1,) * d."""
    tri = np.array([ell - abs(z - (ell - 1)) for z in range(2 * ell - 1)],
                   dtype=float) / (ell * ell)
    out = tri
    for _ in range(d - 1):
        out = np.multiply.outer(out, tri)
    return out


@dataclass
class Flow:
    """Antisymmetric bond function on nearest-neighbor bonds of the cube
    {0..2(ell-1)}^d, stored as exact rationals keyed by (site, axis)."""

    ell: int
    d: int
    bonds: dict      # (site tuple, axis k in 1..d) -> Fraction, flow site -> site+e_k

    @property
    def side(self):
        return max(2 * self.ell - 1, 1)

    def value(self, y, k):
        return self.bonds.get((y, k), Fraction(0))

    def divergence(self, x):
        """Sum of outgoing flow at x (exact)."""
        total = Fraction(0)
        for k in range(1, self.d + 1):
            total += self.value(x, k)
            xm = list(x)
            xm[k - 1] -= 1
            total -= self.value(tuple(xm), k)
        return total

    def energy(self):
        return float(sum(float(v) ** 2 for v in self.bonds.values()))

    def verify(self):
        """Check the divergence identity exactly on every site; abort on
        mismatch (a failure indicates a construction bug)."""
        target = double_block_weights(self.ell, self.d)
        for x in product(range(self.side), repeat=self.d):
            want = (Fraction(1) if all(c == 0 for c in x) else Fraction(0))
            want -= target.get(x, Fraction(0))
            got = self.divergence(x)
            if got != want:
                raise AssertionError(
                    f"flow divergence mismatch at {x}: {got} != {want}")
        return True


def _path_flow(ell):
    """Unique flow on the 1-d path 0..2(ell-1): prefix sums of the target."""
    target = double_block_weights(ell, 1)
    bonds = {}
    carried = Fraction(1)          # mass still to the right of the current bond
    for y in range(2 * ell - 2):
        carried -= target[(y,)]
        if carried != 0:
            bonds[((y,), 1)] = carried
    return Flow(ell=ell, d=1, bonds=bonds)


def _electrical_flow_2d(ell):
    """Minimum-energy flow on the (2 ell - 1)^2 grid graph via the graph
    Laplacian, then an exact rational repair along a snake path so the
    divergence identity holds identically."""
    side = 2 * ell - 1
    n = side * side
    target = double_block_array(ell, 2)   # indexed [x2][x1] after meshgrid care

    def node(x1, x2):
        return x2 * side + x1

    rows, cols, vals = [], [], []
    deg = np.zeros(n)
    for x2 in range(side):
        for x1 in range(side):
            a = node(x1, x2)
            for dx1, dx2 in ((1, 0), (0, 1)):
                y1, y2 = x1 + dx1, x2 + dx2
                if y1 < side and y2 < side:
                    b = node(y1, y2)
                    rows += [a, b]
                    cols += [b, a]
                    vals += [-1.0, -1.0]
                    deg[a] += 1.0
                    deg[b] += 1.0
    rows += list(range(n))
    cols += list(range(n))
    vals += list(deg)
    lap = coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()

    rhs = -target.T.reshape(n).copy()    # target[x1][x2] -> flat (x2 major)
    rhs[node(0, 0)] += 1.0
    # Pin the potential at the last node to make the singular system solvable.
    lap_red = lap[:-1, :-1]
    psi = np.zeros(n)
    psi[:-1] = spsolve(lap_red.tocsc(), rhs[:-1])

    denom = 1 << 48
    bonds = {}
    for x2 in range(side):
        for x1 in range(side):
            a = node(x1, x2)
            if x1 + 1 < side:
                q = Fraction(int(round((psi[a] - psi[node(x1 + 1, x2)]) * denom)), denom)
                if q:
                    bonds[((x1, x2), 1)] = q
            if x2 + 1 < side:
                q = Fraction(int(round((psi[a] - psi[node(x1, x2 + 1)]) * denom)), denom)
                if q:
                    bonds[((x1, x2), 2)] = q

    flow = Flow(ell=ell, d=2, bonds=bonds)

    # Exact repair: push the residual divergence forward along a snake path
    # that visits every node through nearest-neighbor steps.
    want = double_block_weights(ell, 2)
    snake = []
    for x2 in range(side):
        xs = range(side) if x2 % 2 == 0 else range(side - 1, -1, -1)
        snake += [(x1, x2) for x1 in xs]
    for i, x in enumerate(snake[:-1]):
        want_x = (Fraction(1) if x == (0, 0) else Fraction(0)) - want.get(x, Fraction(0))
        carry = want_x - flow.divergence(x)
        if carry == 0:
            continue
        nxt = snake[i + 1]
        if nxt[0] == x[0] + 1 or nxt[1] == x[1] + 1:     # forward bond from x
            key = (x, 1 if nxt[0] != x[0] else 2)
            flow.bonds[key] = flow.bonds.get(key, Fraction(0)) + carry
        else:                                            # forward bond from nxt
            key = (nxt, 1 if nxt[0] != x[0] else 2)
            flow.bonds[key] = flow.bonds.get(key, Fraction(0)) - carry
    return flow


def build_flow(ell, d, verify=True):
    """Flow connecting the Dirac mass at the origin to the double block
    measure, exact in rational arithmetic.

    The divergence identity holds by construction (path solution in d=1,
    electrical flow plus exact repair in d=2); verify=True re-checks it site
    by site before returning.
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if d == 1:
        flow = _path_flow(ell) if ell > 1 else Flow(ell=1, d=1, bonds={})
    elif d == 2:
        flow = _electrical_flow_2d(ell) if ell > 1 else Flow(ell=1, d=2, bonds={})
    else:
        raise ValueError("flows implemented for d in {1, 2}")
    if verify:
        flow.verify()
    return flow


def scale_function(ell, d):
    """Energy scale g_d(ell): ell in d=1, log(ell) in d=2, 1 for d >= 3."""
    if d == 1:
        return float(ell)
    if d == 2:
        return float(np.log(ell))
    return 1.0


class BlockScales(NamedTuple):
    ell: float
    g: float
    s: float
    R: float


def block_scales(N, d) -> BlockScales:
    """Mesoscopic block side ell_N solving ell^{3d/2} g_d(ell) = N^2, with the
    derived scales g_d(ell), s_d(ell) = ell^d g_d(ell) and R_d = (N/ell)^d."""
    if N < 2:
        raise ValueError("N must be >= 2")
    if d == 1:
        ell = float(N) ** 0.8
    elif d == 2:
        ell = optimize.brentq(lambda l: l ** 3 * np.log(l) - N * N, 1.0 + 1e-9,
                              float(N) ** 2, xtol=1e-12, rtol=8.9e-16)
    else:
        ell = float(N) ** (4.0 / (3.0 * d))
    g = scale_function(ell, d)
    s = ell ** d * g
    return BlockScales(ell=ell, g=g, s=s, R=(N / ell) ** d)


# --- block averages and the two-block decomposition on configurations ---

def _shift(field, offset, N, d):
    """field(. + offset) for a flat field over the torus, offset a d-tuple."""
    arr = field.reshape((N,) * d)
    for j in range(1, d + 1):
        if offset[j - 1] % N:
            arr = np.roll(arr, -int(offset[j - 1]) % N, axis=d - j)
    return arr.reshape(-1)


def block_average(omega, ell, N, d):
    """Average of the centered field against the double block weights,
    site by site: sum_y m2(y) omega(. + y).  Requires N > 4 ell."""
    if N <= 4 * ell:
        raise ValueError("block average needs N > 4 ell")
    weights = double_block_array(ell, d)
    out = np.zeros_like(omega, dtype=float)
    for z in product(range(2 * ell - 1), repeat=d):
        out += float(weights[z]) * _shift(omega, z, N, d)
    return out


def maximal_point(pattern):
    """Lexicographic-max of the coordinatewise-maximal points of the pattern."""
    pts = [tuple(p) for p in pattern]
    maximal = [p for p in pts
               if not any(all(qc >= pc for qc, pc in zip(q, p)) and q != p
                          for q in pts)]
    return max(maximal)


def pattern_product(omega, pattern, N, d):
    """omega_{x+A} = prod_{a in A} omega(x + a) for every site x."""
    out = np.ones_like(omega, dtype=float)
    for a in pattern:
        out = out * _shift(omega, a, N, d)
    return out


def split_by_block_average(G, pattern, omega, ell, N, d):
    """Decompose W = sum_x G(x) omega_{x+A} by replacing the maximal-point
    factor with its block average.

    Returns (W, W1, W2) with W = W1 + W2 exactly: W1 carries the block
    average at the maximal point, W2 the difference.
    """
    pts = [tuple(p) for p in pattern]
    if len(pts) < 2:
        raise ValueError("pattern needs at least two elements")
    xa = maximal_point(pts)
    rest = [p for p in pts if p != xa]
    if len(rest) != len(pts) - 1:
        raise ValueError("pattern points must be distinct")
    prod_rest = pattern_product(omega, rest, N, d)
    om_at_max = _shift(omega, xa, N, d)
    om_avg = _shift(block_average(omega, ell, N, d), xa, N, d)
    w_full = float(np.dot(G, prod_rest * om_at_max))
    w1 = float(np.dot(G, prod_rest * om_avg))
    w2 = float(np.dot(G, prod_rest * (om_at_max - om_avg)))
    return w_full, w1, w2


def gradient_coupling(G, pattern, omega, flow: Flow, N):
    """The bond functions H_{k,x} of the summation-by-parts identity:
    H_{k,x} = sum_{bonds (y,k)} flow(y,k) G(x - xa - y) omega_{x - xa - y + rest}.

    Returns an array of shape (d, N**d).  Together with the flow divergence
    identity this rewrites W2 as sum_{k,x} (omega_x - omega_{x+e_k}) H_{k,x}.
    """
    d = flow.d
    pts = [tuple(p) for p in pattern]
    xa = maximal_point(pts)
    rest = [p for p in pts if p != xa]
    prod_rest = pattern_product(omega, rest, N, d)
    base = G * prod_rest          # function of the site x' = x - xa - y
    out = np.zeros((d, omega.size))
    for (y, k), val in flow.bonds.items():
        shift_by = tuple(-(xa[j] + y[j]) for j in range(d))
        out[k - 1] += float(val) * _shift(base, shift_by, N, d)
    return out
