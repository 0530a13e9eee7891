"""Command-line front end: simulate | analyze | verify | spectrum | report.

Thin wrappers over the library; exit code 0 only when every asserted gate of
the invoked command passes.  The environment variable GK_OUTPUT_ROOT, when
set, prefixes every output directory.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from .potential import PotentialParams, noise_strength
from .profile import solve_two_layer_profile, discretize_profile, stationarity_residual
from .lattice import sample_product_measure, save_snapshot, load_snapshot, Configuration
from .dynamics import SimParams, simulate, kernel_state_from_seed, EventBudgetExceeded
from .fields import TestFunction, bind
from .spectral import assemble_operator, TorusShape
from .harness import ExperimentConfig, run_experiment, shape_report, resolve_output_dir


def _out_dir(path):
    full = resolve_output_dir(path)
    os.makedirs(full, exist_ok=True)
    return full


def cmd_simulate(args):
    pot = PotentialParams.from_gamma(args.gamma)
    grid = solve_two_layer_profile(pot, args.K)
    prof = discretize_profile(grid, args.N, args.d)
    snap_times = tuple(float(s) for s in args.snapshots.split(",")) \
        if args.snapshots else ()
    out = _out_dir(args.out)
    manifest = {
        "gamma": args.gamma, "K": args.K, "N": args.N, "d": args.d,
        "t_end": args.t_end, "snapshots": list(snap_times) + [args.t_end],
        "replicas": args.replicas, "seed": args.seed, "files": [],
        "events_per_second": 0.0,
    }
    total_events, total_wall = 0, 0.0
    for r in range(args.replicas):
        ss = np.random.SeedSequence(entropy=(args.seed, r))
        init_ss, run_ss = ss.spawn(2)
        config = sample_product_measure(
            prof, np.random.Generator(np.random.PCG64(init_ss)))
        params = SimParams(N=args.N, d=args.d, K=args.K, t_end=args.t_end,
                           snapshot_times=snap_times, seed=0,
                           max_events=args.max_events)
        try:
            res = simulate(config, params, pot,
                           rng_state=kernel_state_from_seed(run_ss))
        except EventBudgetExceeded as err:
            print(f"replica {r}: {err}", file=sys.stderr)
            return 1
        total_events += res.events
        total_wall += res.wall_seconds
        for t, snap in zip(res.times, res.snapshots):
            fname = f"replica{r:04d}_t{t:.6f}.snap"
            save_snapshot(os.path.join(out, fname), snap, args.K, args.gamma,
                          t, args.seed, extra={"replica": r})
            manifest["files"].append(fname)
    manifest["events_per_second"] = total_events / total_wall if total_wall else 0.0
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
    print(f"wrote {len(manifest['files'])} snapshots to {out} "
          f"({manifest['events_per_second']:.3g} events/s)")
    return 0


def cmd_analyze(args):
    with open(args.manifest) as fh:
        manifest = json.load(fh)
    with open(args.functions) as fh:
        specs = json.load(fh)
    pot = PotentialParams.from_gamma(manifest["gamma"])
    grid = solve_two_layer_profile(pot, manifest["K"])
    prof = discretize_profile(grid, manifest["N"], manifest["d"])
    u_full = prof.full()
    bound = [(spec.get("name", spec["family"]),
              bind(TestFunction.from_spec(spec), manifest["N"], manifest["K"],
                   manifest["d"]))
             for spec in specs]
    base = os.path.dirname(os.path.abspath(args.manifest))
    rows = []
    for fname in manifest["files"]:
        config, meta = load_snapshot(os.path.join(base, fname))
        omega = config.eta.astype(float) - u_full
        for name, bf in bound:
            rows.append((meta.get("time"), fname, name, bf.pair(omega)))
    with open(resolve_output_dir(args.out), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "snapshot", "function", "value"])
        for row in rows:
            writer.writerow([f"{row[0]:.17g}", row[1], row[2], f"{row[3]:.17g}"])
    print(f"analyzed {len(manifest['files'])} snapshots x {len(bound)} functions")
    return 0


def cmd_verify(args):
    from itertools import product as iproduct
    from .profile import DiscreteProfile, constant_profile
    from .identities import (adjoint_one, brute_force_adjoint,
                             CylinderFunction, high_degree_part,
                             evaluate_expansion, expansion_decomposition)
    from .flows import build_flow, split_by_block_average, gradient_coupling, _shift

    pot = PotentialParams.from_gamma(args.gamma)
    checks = {}

    # adjoint identity on every state of small tori
    worst = 0.0
    grid = solve_two_layer_profile(pot, 64.0)
    for N in (3, 4, 5):
        u_int = grid(np.arange(N) * grid.length / N)
        for prof in (constant_profile(0.3, max(N, 8), 1, 1.0, pot).u[:N],
                     u_int):
            profile = DiscreteProfile(u=np.asarray(prof), N=N, d=1, K=1.0,
                                      params=pot)
            for K in (1.0, 4.0):
                bf = brute_force_adjoint(profile, K)
                for bits in iproduct((0, 1), repeat=N):
                    eta = np.array(bits, dtype=np.uint8)
                    config = Configuration(eta.copy(), N, 1)
                    got = adjoint_one(config, profile, K)
                    worst = max(worst, abs(got - bf[eta.tobytes()]))
    checks["adjoint_identity"] = {"worst_residual": float(worst),
                                  "pass": bool(worst <= 1e-10)}

    # cylinder expansion orthogonality and exact decomposition
    profile = DiscreteProfile(u=grid(np.arange(8) * grid.length / 8), N=8,
                              d=1, K=64.0, params=pot)
    f = CylinderFunction.from_callable(
        lambda e: e[(0,)] * e[(1,)], [(0,), (1,)])
    worst = 0.0
    terms = high_degree_part(f, profile, 2)
    rng = np.random.default_rng(5)
    for _ in range(50):
        eta = (rng.random(8) < 0.5).astype(np.uint8)
        config = Configuration(eta.copy(), 8, 1)
        c, lin, high, rem = expansion_decomposition(f, profile, config, 2)
        worst = max(worst, abs(c - (lin + high + rem)))
    checks["cylinder_decomposition"] = {"worst_residual": float(worst),
                                        "pass": bool(worst <= 1e-12)}

    # flows: exact divergence plus the summation-by-parts identity
    ells = (2, 4, 8) if args.quick else (2, 4, 8, 16, 32, 64)
    try:
        for ell in ells:
            build_flow(ell, 1)
            build_flow(ell, 2)
        flow_ok = True
    except AssertionError:
        flow_ok = False
    checks["flow_divergence"] = {"ells": list(ells), "pass": flow_ok}

    N = 64
    ell = 4
    flow = build_flow(ell, 1)
    Gw = rng.standard_normal(N)
    omega = rng.random(N) - 0.5
    worst = 0.0
    pattern = [(0,), (1,)]
    w_full, w1, w2 = split_by_block_average(Gw, pattern, omega, ell, N, 1)
    worst = max(worst, abs(w_full - w1 - w2))
    H = gradient_coupling(Gw, pattern, omega, flow, N)
    sbp = float(np.sum((omega - _shift(omega, (1,), N, 1)) * H[0]))
    worst = max(worst, abs(w2 - sbp))
    checks["two_block_split"] = {"worst_residual": float(worst),
                                 "pass": bool(worst <= 1e-10)}

    ok = all(c["pass"] for c in checks.values())
    payload = {"pass": ok, "checks": checks}
    if args.out:
        with open(resolve_output_dir(args.out), "w") as fh:
            json.dump(payload, fh, indent=2)
    print(json.dumps(payload, indent=2))
    return 0 if ok else 1


def cmd_spectrum(args):
    pot = PotentialParams.from_gamma(args.gamma)
    grid = solve_two_layer_profile(pot, args.K)
    sl = assemble_operator(grid, args.grid)
    out = _out_dir(args.out)
    with open(os.path.join(out, "eigenvalues.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "eigenvalue"])
        for i, lam in enumerate(sl.eigenvalues):
            writer.writerow([i, f"{lam:.17g}"])
    shape = TorusShape(args.K, pot)
    with open(os.path.join(out, "ground_state.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "psi0", "torus_shape", "profile_slope"])
        slope = grid.derivative(sl.theta)
        slope /= np.sqrt(sl.h * np.dot(slope, slope))
        for i in range(sl.theta.size):
            writer.writerow([f"{sl.theta[i]:.17g}", f"{sl.psi0[i]:.17g}",
                             f"{shape(sl.theta[i]):.17g}", f"{slope[i]:.17g}"])
    print(f"lambda0={sl.lambda0:.3e} doublet_split={sl.doublet_split:.3e} "
          f"bulk_gap={sl.bulk_gap:.3f} -> {out}")
    return 0


def cmd_report(args):
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    else:
        cfg = ExperimentConfig()
    for key in ("gamma", "K", "N", "d", "replicas", "seed", "workers"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    if args.out:
        cfg.output = args.out
    report, artifacts = run_experiment(cfg, progress=True)
    print(f"replicas used={report.replicas_used} dropped={report.replicas_dropped}")
    print(f"gated-entry pass fraction: {report.pass_fraction():.3f}")
    for e in report.entries:
        flag = {True: "ok ", False: "OUT", None: "-- "}[e.passed()]
        print(f"  [{flag}] ({e.kind:8s}) Cov[{e.F}@{e.s}, {e.G}@{e.t}] "
              f"emp={e.empirical:.4g} theory={e.theory:.4g} z={e.z:+.2f}")
    gate = report.pass_fraction() >= 0.95 and not report.drop_flag
    return 0 if gate else 1


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="gk",
        description="Glauber+Kawasaki interface dynamics laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run replica trajectories, write snapshots")
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--K", type=float, default=64.0)
    p.add_argument("--N", type=int, default=256)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--t-end", dest="t_end", type=float, default=0.1)
    p.add_argument("--snapshots", type=str, default="")
    p.add_argument("--replicas", type=int, default=2)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--max-events", dest="max_events", type=int, default=2 ** 62)
    p.add_argument("--out", type=str, default="gk-sim")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="evaluate fluctuation fields on snapshots")
    p.add_argument("--manifest", type=str, required=True)
    p.add_argument("--functions", type=str, required=True,
                   help="JSON file with a list of test-function specs")
    p.add_argument("--out", type=str, default="fields.csv")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", help="run the exact-identity suite")
    p.add_argument("--gamma", type=float, default=0.8)
    p.add_argument("--quick", action="store_true")
    p.add_argument("--out", type=str, default="")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("spectrum", help="eigenvalues and ground-state tables")
    p.add_argument("--gamma", type=float, default=0.8)
    p.add_argument("--K", type=float, default=64.0)
    p.add_argument("--grid", type=int, default=1024)
    p.add_argument("--out", type=str, default="gk-spectrum")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("report", help="full covariance experiment vs theory")
    p.add_argument("--config", type=str, default="")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--K", type=float, default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", type=str, default="")
    p.set_defaults(func=cmd_report)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
