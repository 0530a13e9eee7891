"""Exact continuous-time simulation of the exchange + spin-flip dynamics.

The generator scales exchanges by N^2 and flips by K.  Two implementations
are kept deliberately: the event-driven kernel (rejection-free, O(1) per
event) and a reference simulator that recomputes every rate from scratch at
every event with numpy.  The reference path is the oracle for law-exactness
tests on enumerable lattices; the kernel is what experiments run.
"""

import time as _time
import numpy as np
from dataclasses import dataclass, field

from .potential import PotentialParams, flip_rate
from .lattice import Configuration
from . import _kernel


class EventBudgetExceeded(RuntimeError):
    """Carries the progress state of a run that hit its event cap."""

    def __init__(self, time_reached, events, config):
        super().__init__(
            f"event budget exhausted after {events} events at time {time_reached:.6g}")
        self.time_reached = time_reached
        self.events = events
        self.config = config


@dataclass(frozen=True)
class SimParams:
    """Lattice geometry, generator scales, observation times and the seed."""

    N: int
    d: int
    K: float
    t_end: float
    snapshot_times: tuple = ()
    seed: int = 0
    max_events: int = 2 ** 62

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("the dynamics runs in d = 1 or 2")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        times = tuple(sorted(float(t) for t in self.snapshot_times))
        if times and (times[0] < 0 or times[-1] > self.t_end):
            raise ValueError("snapshot times must lie in [0, t_end]")
        object.__setattr__(self, "snapshot_times", times)

    @property
    def all_times(self):
        """Snapshot times with t_end appended (the kernel's stopping grid)."""
        if self.snapshot_times and self.snapshot_times[-1] == self.t_end:
            return self.snapshot_times
        return self.snapshot_times + (self.t_end,)


@dataclass
class SimResult:
    params: SimParams
    times: tuple
    snapshots: list                # Configuration per time in `times`
    final: Configuration
    events: int
    wall_seconds: float
    events_per_second: float
    rate_audit: dict = field(default_factory=dict)


def kernel_state_from_seed(seed):
    """xoshiro256++ state words derived from an integer or SeedSequence."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else \
        np.random.SeedSequence(seed)
    state = ss.generate_state(4, np.uint64)
    if not state.any():
        state[0] = np.uint64(1)
    return state


def simulate(config: Configuration, params: SimParams, pot: PotentialParams,
             rng_state=None) -> SimResult:
    """Exact-law trajectory of the chain; deterministic given the seed.

    Snapshots hold the state at the last event before each requested time.
    Raises EventBudgetExceeded (with progress attached) when the cap hits.
    """
    eta = config.eta.copy()
    rates = _kernel.class_rates(pot.gamma)
    state = kernel_state_from_seed(params.seed) if rng_state is None \
        else np.asarray(rng_state, dtype=np.uint64).copy()
    times = np.array(params.all_times, dtype=np.float64)
    snaps = np.empty((times.size, eta.size), dtype=np.uint8)

    nxt, prv = _kernel.neighbor_tables(params.N, params.d)
    t0 = _time.perf_counter()
    with np.errstate(over="ignore"):
        if params.d == 1:
            status, t_reached, events = _kernel.run_kernel_1d(
                eta, params.N, float(params.K), rates, 0.0, times, state,
                params.max_events, snaps)
        else:
            status, t_reached, events = _kernel.run_kernel(
                eta, params.N, params.d, float(params.K), rates, 0.0, times,
                state, params.max_events, snaps, nxt, prv)
    wall = _time.perf_counter() - t0

    final = Configuration(eta, params.N, params.d)
    if status == 1:
        raise EventBudgetExceeded(t_reached, int(events), final)

    chain = [Configuration(snaps[i].copy(), params.N, params.d)
             for i in range(times.size)]
    lam_e, lam_g = _kernel.audit_structures(eta, params.d, rates,
                                            float(params.K), params.N, nxt, prv)
    return SimResult(
        params=params, times=tuple(times), snapshots=chain, final=final,
        events=int(events), wall_seconds=wall,
        events_per_second=float(events) / wall if wall > 0 else float("inf"),
        rate_audit={"exchange": lam_e, "flip": lam_g})


def simulate_reference(config: Configuration, params: SimParams,
                       pot: PotentialParams, rng=None, record_events=False):
    """Transparent Gillespie reference: every rate recomputed from scratch at
    every event.  Slow on purpose; the oracle for the event-driven kernel.

    With record_events=True the result carries the event times in
    rate_audit["event_times"].
    """
    rng = np.random.default_rng(params.seed) if rng is None else rng
    c = config.copy()
    N, d, K = params.N, params.d, float(params.K)
    n = c.eta.size
    times = list(params.all_times)
    snaps, recorded = [], 0
    t = 0.0
    events = 0
    event_times = []
    t0 = _time.perf_counter()
    while True:
        eta = c.eta
        bonds = []
        for x in range(n):
            for j in range(1, d + 1):
                if eta[x] != eta[c.neighbor(x, j)]:
                    bonds.append((x, j))
        site_rates = np.empty(n)
        for x in range(n):
            i1 = x % N
            base = x - i1
            sm = 2 * int(eta[base + (i1 - 1) % N]) - 1
            s0 = 2 * int(eta[x]) - 1
            sp = 2 * int(eta[base + (i1 + 1) % N]) - 1
            site_rates[x] = flip_rate(sm, s0, sp, pot)
        lam_e = N * N * len(bonds)
        lam_g = K * site_rates.sum()
        lam = lam_e + lam_g
        t = times[-1] if lam <= 0 else t + rng.exponential(1.0 / lam)
        while recorded < len(times) and t >= times[recorded]:
            snaps.append(c.copy())
            recorded += 1
        if recorded >= len(times):
            break
        if events >= params.max_events:
            raise EventBudgetExceeded(t, events, c)
        if rng.random() * lam < lam_e:
            x, j = bonds[rng.integers(len(bonds))]
            c.exchange(x, j)
        else:
            x = rng.choice(n, p=site_rates / site_rates.sum())
            c.flip(x)
        if record_events:
            event_times.append(t)
        events += 1
    wall = _time.perf_counter() - t0
    audit = {"event_times": np.array(event_times)} if record_events else {}
    return SimResult(params=params, times=tuple(times), snapshots=snaps,
                     final=c, events=events, wall_seconds=wall,
                     events_per_second=events / wall if wall > 0 else float("inf"),
                     rate_audit=audit)


def verify_rate_bookkeeping(config: Configuration, params: SimParams,
                            pot: PotentialParams):
    """Run the kernel and compare its incrementally maintained structures
    against a from-scratch rebuild of the final state.  Returns the relative
    discrepancy of the total rates (exactly zero when counts agree)."""
    eta = config.eta.copy()
    rates = _kernel.class_rates(pot.gamma)
    state = kernel_state_from_seed(params.seed)
    times = np.array(params.all_times, dtype=np.float64)
    snaps = np.empty((times.size, eta.size), dtype=np.uint8)
    nxt, prv = _kernel.neighbor_tables(params.N, params.d)
    with np.errstate(over="ignore"):
        _kernel.run_kernel(eta, params.N, params.d, float(params.K), rates,
                           0.0, times, state, params.max_events, snaps, nxt, prv)
        (bond_list, bond_pos, n_bonds, site_cls, cls_sites, cls_pos,
         cls_count) = _kernel.build_structures(eta, params.d, nxt, prv)
        lam_e, lam_g = _kernel.audit_structures(eta, params.d, rates,
                                                float(params.K), params.N, nxt, prv)
    inc_e = params.N ** 2 * n_bonds
    inc_g = float(params.K) * float(np.dot(cls_count, rates))
    denom = max(lam_e + lam_g, 1e-300)
    return abs(inc_e - lam_e) / denom + abs(inc_g - lam_g) / denom


def invariant_measure_check(N, d, rho, t_end, replicas=64, seed=7,
                            n_times=8):
    """Pure-exchange run started from the flat Bernoulli measure: replica
    and time averaged occupation and nearest-neighbor pair correlation,
    against their Bernoulli values with replica-level 3 sigma bands."""
    from .profile import constant_profile
    from .lattice import sample_product_measure
    from .potential import PotentialParams as PP

    pot = PP.from_gamma(0.8)          # gamma is irrelevant at K = 0
    prof = constant_profile(rho, N, d, 1.0, pot)
    obs_times = tuple(t_end * (i + 1) / n_times for i in range(n_times))
    occ = np.empty(replicas)
    pair = np.empty(replicas)
    var = np.empty(replicas)
    for r in range(replicas):
        ss = np.random.SeedSequence(entropy=(seed, r))
        init_ss, run_ss = ss.spawn(2)
        c0 = sample_product_measure(prof, np.random.Generator(np.random.PCG64(init_ss)))
        params = SimParams(N=N, d=d, K=0.0, t_end=t_end,
                           snapshot_times=obs_times, seed=0)
        res = simulate(c0, params, pot, rng_state=kernel_state_from_seed(run_ss))
        oo, pp, vv = [], [], []
        for snap in res.snapshots[:n_times]:
            eta = snap.eta.astype(float)
            oo.append(eta.mean())
            pp.append(float(np.mean(eta * np.roll(eta.reshape((N,) * d), -1,
                                                  axis=d - 1).reshape(-1))))
            vv.append(float(np.mean((eta - eta.mean()) ** 2)))
        occ[r], pair[r], var[r] = np.mean(oo), np.mean(pp), np.mean(vv)

    def banded(samples, theory):
        m = samples.mean()
        se = samples.std(ddof=1) / np.sqrt(replicas)
        return {"mean": float(m), "theory": float(theory),
                "se": float(se), "z": float((m - theory) / se) if se > 0 else 0.0}

    return {
        "occupation": banded(occ, rho),
        "pair_correlation": banded(pair, rho * rho),
        "site_variance": banded(var, rho * (1.0 - rho)),
    }
