"""Occupation configurations on the discrete torus and the elementary moves.

Configurations are flat uint8 arrays over the d-dimensional torus with
coordinate 1 fastest-varying, so the axis the flip rate reads is contiguous.
The two elementary moves are the neighbor exchange (particle-conserving) and
the single-site flip.  Product measures with site-dependent marginals are the
reference measures throughout.
"""

import json
import numpy as np
from dataclasses import dataclass, field

from .profile import DiscreteProfile

SNAPSHOT_MAGIC = b"GKSNAP01"
SNAPSHOT_VERSION = 1


@dataclass
class Configuration:
    """Occupation state eta over the torus, with cached particle count."""

    eta: np.ndarray          # flat uint8 array of length N**d
    N: int
    d: int
    count: int = field(default=-1)

    def __post_init__(self):
        self.eta = np.ascontiguousarray(self.eta, dtype=np.uint8)
        if self.eta.size != self.N ** self.d:
            raise ValueError("eta size does not match N**d")
        if self.count < 0:
            self.count = int(self.eta.sum())

    def copy(self):
        return Configuration(self.eta.copy(), self.N, self.d, self.count)

    def site_index(self, *coords):
        """Flat index of a lattice point given d coordinates (wrapped mod N)."""
        if len(coords) != self.d:
            raise ValueError("wrong number of coordinates")
        idx = 0
        for c in reversed(coords):
            idx = idx * self.N + (int(c) % self.N)
        return idx

    def neighbor(self, x, j, sign=+1):
        """Flat index of x + sign * e_j (torus wrap), j = 1..d."""
        N = self.N
        stride = N ** (j - 1)
        block = N ** j
        base = (x // block) * block
        offset = x - base
        return base + (offset + sign * stride) % block

    def exchange(self, x, j):
        """Swap eta_x with eta_{x+e_j} in place."""
        y = self.neighbor(x, j)
        ex, ey = self.eta[x], self.eta[y]
        self.eta[x], self.eta[y] = ey, ex

    def flip(self, x):
        """Replace eta_x by 1 - eta_x in place."""
        old = int(self.eta[x])
        self.eta[x] = 1 - old
        self.count += 1 - 2 * old

    def sigma(self, x):
        """Spin variable 2 eta_x - 1."""
        return 2 * int(self.eta[x]) - 1

    def centered_occupation(self, profile: DiscreteProfile, x):
        """omega_x = eta_x - u(x), the centered occupation at a flat site."""
        return float(self.eta[x]) - profile.value_at(x)

    def omega_field(self, profile: DiscreteProfile):
        """Array of centered occupations over all sites."""
        return self.eta.astype(float) - profile.full()

    def state_key(self):
        """Hashable full-state digest (for untouched-sites comparisons)."""
        return self.eta.tobytes()


def sample_product_measure(profile: DiscreteProfile, seed) -> Configuration:
    """Independent Bernoulli(u(x)) occupations from a seed or Generator."""
    rng = seed if isinstance(seed, np.random.Generator) else \
        np.random.Generator(np.random.PCG64(seed))
    u = profile.full()
    eta = (rng.random(u.size) < u).astype(np.uint8)
    return Configuration(eta, profile.N, profile.d)


def measure_weight(profile: DiscreteProfile, config: Configuration):
    """Product-measure probability of a configuration (small lattices only)."""
    u = profile.full()
    eta = config.eta.astype(float)
    return float(np.prod(np.where(eta == 1.0, u, 1.0 - u)))


def exchange_ratio(profile: DiscreteProfile, config: Configuration, x, j):
    """nu(exchanged config) / nu(config) for the bond (x, x+e_j), exactly.

    Swapping unequal neighbors tilts the measure by the logit difference:
    ratio = exp([eta_y - eta_x] [logit(u(x)) - logit(u(y))]) with
    logit(u) = log(u / (1-u)); identically 1 when the profile is flat along j.
    """
    y = config.neighbor(x, j)
    ux, uy = profile.value_at(x), profile.value_at(y)
    de = float(config.eta[y]) - float(config.eta[x])
    if de == 0.0:
        return 1.0
    return float(np.exp(de * (np.log(ux / (1.0 - ux)) - np.log(uy / (1.0 - uy)))))


def flip_ratio(profile: DiscreteProfile, config: Configuration, x):
    """nu(flipped config) / nu(config) = 1 + (1 - 2 u(x)) omega_x / chi(x)."""
    ux = profile.value_at(x)
    om = config.centered_occupation(profile, x)
    return 1.0 + (1.0 - 2.0 * ux) * om / (ux * (1.0 - ux))


def save_snapshot(path, config: Configuration, K, gamma, time, seed, extra=None):
    """Write a snapshot: 56-byte header followed by a packed bitmap, plus a
    JSON sidecar next to it."""
    header = np.zeros(48, dtype=np.uint8)
    header[:4] = np.frombuffer(np.uint32(SNAPSHOT_VERSION).tobytes(), dtype=np.uint8)
    header[4:8] = np.frombuffer(np.uint32(config.d).tobytes(), dtype=np.uint8)
    header[8:16] = np.frombuffer(np.uint64(config.N).tobytes(), dtype=np.uint8)
    header[16:24] = np.frombuffer(np.float64(K).tobytes(), dtype=np.uint8)
    header[24:32] = np.frombuffer(np.float64(gamma).tobytes(), dtype=np.uint8)
    header[32:40] = np.frombuffer(np.float64(time).tobytes(), dtype=np.uint8)
    header[40:48] = np.frombuffer(np.uint64(seed).tobytes(), dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(header.tobytes())
        fh.write(np.packbits(config.eta).tobytes())
    sidecar = {
        "version": SNAPSHOT_VERSION, "d": config.d, "N": config.N,
        "K": float(K), "gamma": float(gamma), "time": float(time),
        "seed": int(seed), "particles": config.count,
    }
    if extra:
        sidecar.update(extra)
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2)


def load_snapshot(path):
    """Read a snapshot file; returns (Configuration, metadata dict)."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"not a snapshot file: bad magic {magic!r}")
        header = np.frombuffer(fh.read(48), dtype=np.uint8)
        version = int(np.frombuffer(header[:4], dtype=np.uint32)[0])
        d = int(np.frombuffer(header[4:8], dtype=np.uint32)[0])
        N = int(np.frombuffer(header[8:16], dtype=np.uint64)[0])
        K = float(np.frombuffer(header[16:24], dtype=np.float64)[0])
        gamma = float(np.frombuffer(header[24:32], dtype=np.float64)[0])
        time = float(np.frombuffer(header[32:40], dtype=np.float64)[0])
        seed = int(np.frombuffer(header[40:48], dtype=np.uint64)[0])
        nbytes = (N ** d + 7) // 8
        bits = np.frombuffer(fh.read(nbytes), dtype=np.uint8)
    eta = np.unpackbits(bits)[:N ** d].astype(np.uint8)
    meta = {"version": version, "d": d, "N": N, "K": K, "gamma": gamma,
            "time": time, "seed": seed}
    return Configuration(eta, N, d), meta
