"""The linearized operator around the profile: spectrum and projection.

The operator d^2/dx^2 - V''(rho^K) annihilates the profile slope.  On the
two-layer torus its top of spectrum is a near-degenerate pair (the even
combination of the layer modes sits an exponentially small amount above the
translation mode), then a uniform gap.  The semigroup run at speed K
collapses everything else onto the ground mode, which is the rigidity behind
the shape of the fluctuation limit.

Run:  python demos/04_spectrum_and_semigroup.py
"""

import numpy as np

from gklab import (PotentialParams, solve_two_layer_profile,
                   assemble_operator, ground_eigenvalue, semigroup_apply,
                   TorusShape)

pot = PotentialParams.from_gamma(0.8)

print("spectral ladder (grid 2048):")
for K in (64.0, 256.0, 1024.0):
    grid = solve_two_layer_profile(pot, K)
    sl = assemble_operator(grid, 2048)
    ek = TorusShape(K, pot)
    print(f"  K = {K:6.0f}: lambda0 = {sl.lambda0:+.2e}, doublet split = "
          f"{sl.doublet_split:.2e}, bulk gap = {sl.bulk_gap:.3f}, "
          f"||psi0 - torus shape|| = {sl.norm(sl.psi0 - ek(sl.theta)):.4f}")

print("\ngrid refinement quarters the translation eigenvalue (K = 64):")
grid = solve_two_layer_profile(pot, 64.0)
for M in (1024, 2048, 4096):
    print(f"  {M:5d} points: lambda0 = {ground_eigenvalue(grid, M):+.3e}")

print("\nsemigroup projection at K = 256 (doublet split ~ 5e-4):")
grid256 = solve_two_layer_profile(pot, 256.0)
sl = assemble_operator(grid256, 1024)
f = np.exp(-(sl.theta - 0.3) ** 2)
proj = sl.project_ground(f)
for t in (0.0, 0.005, 0.02, 0.1):
    out = semigroup_apply(sl, t, f)
    print(f"  t = {t:5.3f}: ||P_t f - psi0<f,psi0>|| = "
          f"{sl.norm(out - proj):.3e}  (vs ||f|| = {sl.norm(f):.3f})")
print("the residual floor is the even doublet partner: at K = 64 its split")
print("is still ~0.2 and it doubles as the slow layer-annihilation mode, so")
print("the clean rank-one collapse needs the larger-K regime shown here")
