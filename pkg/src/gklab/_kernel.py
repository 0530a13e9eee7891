"""Event-driven simulation kernel.

Rejection-free composite sampling: exchange events are drawn uniformly from
the maintained set of disagreeing nearest-neighbor bonds (equal-neighbor
exchanges are no-ops of the generator and are never scheduled); flip events
are drawn by window class, with per-class site lists updated in O(1) per
event.  Class counts are integers, so total rates are recomputed exactly
from the counts at every step rather than drifted incrementally.

The structure maintenance is inlined into the main loop by hand: the update
helpers cost ~6x in call overhead under numba, and this loop is the hot path
of every ensemble experiment.  Neighbor indices are flat table lookups; the
torus wrap is paid once at setup.  Updates are idempotent, so the per-event
work lists may contain duplicates without harm.

The RNG is xoshiro256++ carried explicitly in the state vector, so runs are
bit-reproducible across processes and independent of global RNG state.  The
simulation clock accumulates exponential increments with Kahan compensation.
"""

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:          # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << k) | (x >> (np.uint64(64) - k))


@njit(cache=True)
def _next_u64(state):
    s0, s1, s2, s3 = state[0], state[1], state[2], state[3]
    result = _rotl(s0 + s3, np.uint64(23)) + s0
    t = s1 << np.uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, np.uint64(45))
    state[0], state[1], state[2], state[3] = s0, s1, s2, s3
    return result


@njit(cache=True, inline="always")
def _uniform(state):
    """Uniform in (0, 1]: safe as the argument of log."""
    return (np.float64(_next_u64(state) >> np.uint64(11)) + 1.0) * (0.5 ** 53)


@njit(cache=True, inline="always")
def _uniform_half_open(state):
    """Uniform in [0, 1)."""
    return np.float64(_next_u64(state) >> np.uint64(11)) * (0.5 ** 53)


def neighbor_tables(N, d):
    """Flat forward/backward neighbor tables: nxt[x * d + j] = x + e_j."""
    n = N ** d
    x = np.arange(n, dtype=np.int64)
    nxt = np.empty(n * d, dtype=np.int64)
    prv = np.empty(n * d, dtype=np.int64)
    for j in range(d):
        stride = N ** j
        block = stride * N
        base = (x // block) * block
        off = x - base
        nxt[x * d + j] = base + (off + stride) % block
        prv[x * d + j] = base + (off - stride) % block
    return nxt, prv


def class_rates(gamma):
    """Flip rate per window class (class = 4 eta_- + 2 eta_0 + eta_+)."""
    rates = np.empty(8)
    for c in range(8):
        sm = 2 * ((c >> 2) & 1) - 1
        s0 = 2 * ((c >> 1) & 1) - 1
        sp = 2 * (c & 1) - 1
        rates[c] = 1.0 - gamma * s0 * (sm + sp) + gamma * gamma * sm * sp
    return rates


@njit(cache=True)
def build_structures(eta, d, nxt, prv):
    """Initial bond set and class lists for a configuration."""
    n = eta.size
    bond_list = np.empty(n * d, dtype=np.int64)
    bond_pos = np.full(n * d, -1, dtype=np.int64)
    n_bonds = 0
    for x in range(n):
        for j in range(d):
            if eta[x] != eta[nxt[x * d + j]]:
                bond_list[n_bonds] = x * d + j
                bond_pos[x * d + j] = n_bonds
                n_bonds += 1
    site_cls = np.empty(n, dtype=np.uint8)
    cls_count = np.zeros(8, dtype=np.int64)
    cls_sites = np.empty((8, n), dtype=np.int64)
    cls_pos = np.empty(n, dtype=np.int64)
    for x in range(n):
        c = eta[prv[x * d]] * 4 + eta[x] * 2 + eta[nxt[x * d]]
        site_cls[x] = c
        cls_sites[c, cls_count[c]] = x
        cls_pos[x] = cls_count[c]
        cls_count[c] += 1
    return bond_list, bond_pos, n_bonds, site_cls, cls_sites, cls_pos, cls_count


@njit(cache=True)
def run_kernel(eta, N, d, K, rates, t_start, snap_times, rng_state,
               max_events, snaps_out, nxt, prv):
    """Simulate the chain from t_start, recording the state at each snapshot
    time; the last snapshot time is the end of the run.

    Returns (status, time_reached, events); status 1 means the event budget
    was exhausted.  The state array is left at the final simulated state.
    """
    n2 = np.float64(N) * np.float64(N)
    (bond_list, bond_pos, n_bonds, site_cls, cls_sites, cls_pos,
     cls_count) = build_structures(eta, d, nxt, prv)

    t = t_start
    t_comp = 0.0
    events = np.int64(0)
    snap_idx = 0
    n_snaps = len(snap_times)
    t_end = snap_times[n_snaps - 1]
    bond_chk = np.empty(8, dtype=np.int64)
    site_chk = np.empty(6, dtype=np.int64)

    while True:
        lam_g = K * (cls_count[0] * rates[0] + cls_count[1] * rates[1]
                     + cls_count[2] * rates[2] + cls_count[3] * rates[3]
                     + cls_count[4] * rates[4] + cls_count[5] * rates[5]
                     + cls_count[6] * rates[6] + cls_count[7] * rates[7])
        lam_e = n2 * n_bonds
        lam = lam_e + lam_g

        if lam <= 0.0:
            t = t_end            # frozen state persists to the end
        else:
            dt = -np.log(_uniform(rng_state)) / lam
            y_add = dt - t_comp
            t_new = t + y_add
            t_comp = (t_new - t) - y_add
            t = t_new

        if t >= snap_times[snap_idx]:
            while snap_idx < n_snaps and t >= snap_times[snap_idx]:
                snaps_out[snap_idx, :] = eta
                snap_idx += 1
            if snap_idx >= n_snaps:
                return 0, t, events
        if events >= max_events:
            return 1, t, events

        pick = _uniform_half_open(rng_state) * lam
        if pick < lam_e:
            k = np.int64(_uniform_half_open(rng_state) * n_bonds)
            if k >= n_bonds:
                k = n_bonds - 1
            b = bond_list[k]
            x = b // d
            j0 = b - x * d
            y = nxt[b]
            hold = eta[x]
            eta[x] = eta[y]
            eta[y] = hold

            n_chk = 0
            for j in range(d):
                bond_chk[n_chk] = x * d + j
                bond_chk[n_chk + 1] = prv[x * d + j] * d + j
                bond_chk[n_chk + 2] = y * d + j
                bond_chk[n_chk + 3] = prv[y * d + j] * d + j
                n_chk += 4
            site_chk[0] = prv[x * d]
            site_chk[1] = x
            site_chk[2] = nxt[x * d]
            site_chk[3] = prv[y * d]
            site_chk[4] = y
            site_chk[5] = nxt[y * d]
            n_site = 6
        else:
            target = (pick - lam_e) / K
            acc = 0.0
            c = 0
            for ci in range(8):
                c = ci
                acc += cls_count[ci] * rates[ci]
                if acc > target:
                    break
            idx = np.int64(_uniform_half_open(rng_state) * cls_count[c])
            if idx >= cls_count[c]:
                idx = cls_count[c] - 1
            x = cls_sites[c, idx]
            eta[x] = 1 - eta[x]

            n_chk = 0
            for j in range(d):
                bond_chk[n_chk] = x * d + j
                bond_chk[n_chk + 1] = prv[x * d + j] * d + j
                n_chk += 2
            site_chk[0] = prv[x * d]
            site_chk[1] = x
            site_chk[2] = nxt[x * d]
            n_site = 3

        for ii in range(n_chk):
            b = bond_chk[ii]
            s = b // d
            disagree = eta[s] != eta[nxt[b]]
            pos = bond_pos[b]
            if disagree:
                if pos < 0:
                    bond_list[n_bonds] = b
                    bond_pos[b] = n_bonds
                    n_bonds += 1
            elif pos >= 0:
                n_bonds -= 1
                last = bond_list[n_bonds]
                bond_list[pos] = last
                bond_pos[last] = pos
                bond_pos[b] = -1

        for ii in range(n_site):
            s = site_chk[ii]
            c_new = eta[prv[s * d]] * 4 + eta[s] * 2 + eta[nxt[s * d]]
            c_old = site_cls[s]
            if c_new != c_old:
                pos = cls_pos[s]
                cnt = cls_count[c_old] - 1
                last = cls_sites[c_old, cnt]
                cls_sites[c_old, pos] = last
                cls_pos[last] = pos
                cls_count[c_old] = cnt
                cls_sites[c_new, cls_count[c_new]] = s
                cls_pos[s] = cls_count[c_new]
                cls_count[c_new] += 1
                site_cls[s] = c_new

        events += 1


@njit(cache=True)
def run_kernel_1d(eta, N, K, rates, t_start, snap_times, rng_state,
                  max_events, snaps_out):
    """d=1 twin of run_kernel with unit strides hard-wired.

    The one-dimensional chain is where ensemble experiments run at scale, so
    this copy drops the direction loop, the bond-id arithmetic, and the
    neighbor tables of the generic kernel.  Any change to the event logic
    must be mirrored in run_kernel; the cross-law tests compare both against
    the reference simulator.
    """
    n = eta.size
    n2 = np.float64(N) * np.float64(N)
    bond_list = np.empty(n, dtype=np.int64)
    bond_pos = np.full(n, -1, dtype=np.int64)
    n_bonds = 0
    for x in range(n):
        if eta[x] != eta[(x + 1) % n]:
            bond_list[n_bonds] = x
            bond_pos[x] = n_bonds
            n_bonds += 1
    site_cls = np.empty(n, dtype=np.uint8)
    cls_count = np.zeros(8, dtype=np.int64)
    cls_sites = np.empty((8, n), dtype=np.int64)
    cls_pos = np.empty(n, dtype=np.int64)
    for x in range(n):
        c = eta[(x - 1) % n] * 4 + eta[x] * 2 + eta[(x + 1) % n]
        site_cls[x] = c
        cls_sites[c, cls_count[c]] = x
        cls_pos[x] = cls_count[c]
        cls_count[c] += 1

    t = t_start
    t_comp = 0.0
    events = np.int64(0)
    snap_idx = 0
    n_snaps = len(snap_times)
    t_end = snap_times[n_snaps - 1]
    site_chk = np.empty(4, dtype=np.int64)

    while True:
        lam_g = K * (cls_count[0] * rates[0] + cls_count[1] * rates[1]
                     + cls_count[2] * rates[2] + cls_count[3] * rates[3]
                     + cls_count[4] * rates[4] + cls_count[5] * rates[5]
                     + cls_count[6] * rates[6] + cls_count[7] * rates[7])
        lam_e = n2 * n_bonds
        lam = lam_e + lam_g

        if lam <= 0.0:
            t = t_end
        else:
            dt = -np.log(_uniform(rng_state)) / lam
            y_add = dt - t_comp
            t_new = t + y_add
            t_comp = (t_new - t) - y_add
            t = t_new

        if t >= snap_times[snap_idx]:
            while snap_idx < n_snaps and t >= snap_times[snap_idx]:
                snaps_out[snap_idx, :] = eta
                snap_idx += 1
            if snap_idx >= n_snaps:
                return 0, t, events
        if events >= max_events:
            return 1, t, events

        pick = _uniform_half_open(rng_state) * lam
        if pick < lam_e:
            k = np.int64(_uniform_half_open(rng_state) * n_bonds)
            if k >= n_bonds:
                k = n_bonds - 1
            x = bond_list[k]
            y = x + 1 if x + 1 < n else 0
            hold = eta[x]
            eta[x] = eta[y]
            eta[y] = hold
            # the swapped bond stays disagreeing; only its two neighbors move
            b0 = x - 1 if x > 0 else n - 1
            b1 = y
            n_site = 4
            site_chk[0] = b0
            site_chk[1] = x
            site_chk[2] = y
            site_chk[3] = y + 1 if y + 1 < n else 0
        else:
            target = (pick - lam_e) / K
            acc = 0.0
            c = 0
            for ci in range(8):
                c = ci
                acc += cls_count[ci] * rates[ci]
                if acc > target:
                    break
            idx = np.int64(_uniform_half_open(rng_state) * cls_count[c])
            if idx >= cls_count[c]:
                idx = cls_count[c] - 1
            x = cls_sites[c, idx]
            eta[x] = 1 - eta[x]
            b0 = x - 1 if x > 0 else n - 1
            b1 = x
            n_site = 3
            site_chk[0] = b0
            site_chk[1] = x
            site_chk[2] = x + 1 if x + 1 < n else 0

        for b in (b0, b1):
            s2 = b + 1 if b + 1 < n else 0
            disagree = eta[b] != eta[s2]
            pos = bond_pos[b]
            if disagree:
                if pos < 0:
                    bond_list[n_bonds] = b
                    bond_pos[b] = n_bonds
                    n_bonds += 1
            elif pos >= 0:
                n_bonds -= 1
                last = bond_list[n_bonds]
                bond_list[pos] = last
                bond_pos[last] = pos
                bond_pos[b] = -1

        for ii in range(n_site):
            s = site_chk[ii]
            sm = s - 1 if s > 0 else n - 1
            sp = s + 1 if s + 1 < n else 0
            c_new = eta[sm] * 4 + eta[s] * 2 + eta[sp]
            c_old = site_cls[s]
            if c_new != c_old:
                pos = cls_pos[s]
                cnt = cls_count[c_old] - 1
                last = cls_sites[c_old, cnt]
                cls_sites[c_old, pos] = last
                cls_pos[last] = pos
                cls_count[c_old] = cnt
                cls_sites[c_new, cls_count[c_new]] = s
                cls_pos[s] = cls_count[c_new]
                cls_count[c_new] += 1
                site_cls[s] = c_new

        events += 1


@njit(cache=True)
def audit_structures(eta, d, rates, K, N, nxt, prv):
    """Recompute total rates from scratch (consistency oracle)."""
    n = eta.size
    lam_e = 0.0
    lam_g = 0.0
    for x in range(n):
        for j in range(d):
            if eta[x] != eta[nxt[x * d + j]]:
                lam_e += np.float64(N) * np.float64(N)
        lam_g += K * rates[eta[prv[x * d]] * 4 + eta[x] * 2 + eta[nxt[x * d]]]
    return lam_e, lam_g
