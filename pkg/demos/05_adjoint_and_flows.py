"""Exact identities: the generator adjoint and the discrete flows.

Everything here is checked against brute-force enumeration, so the numbers
are residuals at float precision rather than statistical bands: the adjoint
of the full generator applied to the constant function, the cylinder
expansion of the reaction observable, and the flows transporting the Dirac
mass to block averages with their d-dependent energy scaling.

Run:  python demos/05_adjoint_and_flows.py
"""

import numpy as np
from itertools import product

from gklab import (PotentialParams, solve_two_layer_profile, DiscreteProfile,
                   Configuration, adjoint_one, brute_force_adjoint,
                   reaction_observable, expansion_decomposition,
                   centered_reaction_gap, build_flow, block_scales,
                   discretize_profile)

pot = PotentialParams.from_gamma(0.8)
grid = solve_two_layer_profile(pot, 64.0)

print("adjoint identity on every configuration of a 5-site torus:")
N, K = 5, 4.0
prof = DiscreteProfile(u=grid(np.arange(N) * grid.length / N), N=N, d=1,
                       K=K, params=pot)
brute = brute_force_adjoint(prof, K)
worst = 0.0
for bits in product((0, 1), repeat=N):
    eta = np.array(bits, dtype=np.uint8)
    config = Configuration(eta.copy(), N, 1)
    worst = max(worst, abs(adjoint_one(config, prof, K) - brute[eta.tobytes()]))
print(f"  worst |coefficient tables - move-by-move definition| = {worst:.2e}\n")

print("cylinder expansion of the reaction observable (8-site interface):")
prof8 = DiscreteProfile(u=grid(np.arange(8) * grid.length / 8), N=8, d=1,
                        K=64.0, params=pot)
f = reaction_observable(pot)
worst = 0.0
for bits in product((0, 1), repeat=8):
    config = Configuration(np.array(bits, dtype=np.uint8), 8, 1)
    c, lin, high, rem = expansion_decomposition(f, prof8, config, 3)
    worst = max(worst, abs(c - (lin + high + rem)))
print(f"  decomposition closes to {worst:.2e} on all 256 states")
coeff, target = centered_reaction_gap(discretize_profile(grid, 256, 1), 64)
print(f"  linear-response coefficient {coeff:+.5f} vs -V''(u) {target:+.5f}\n")

print("flows from the origin to the double block average:")
for d in (1, 2):
    energies = []
    for ell in (4, 16, 64):
        flow = build_flow(ell, d, verify=(ell <= 16))
        energies.append(flow.energy())
    label = "linear in ell" if d == 1 else "logarithmic in ell"
    print(f"  d = {d}: energies at ell = 4, 16, 64: "
          f"{[f'{e:.3f}' for e in energies]}  ({label})")
print("\nmesoscopic block scales:")
for N, d in ((32, 1), (1024, 1), (100, 2)):
    s = block_scales(N, d)
    print(f"  N = {N:5d}, d = {d}: ell = {s.ell:9.2f}, g = {s.g:7.3f}, "
          f"entropy order (N/ell)^d = {s.R:8.2f}")
