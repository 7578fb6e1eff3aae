"""Non-uniform reservoir couplings: averaged conductivity and local kappa(x).

Diluting the couplings raises the conductivity (every-m-th coupling gives m
times the uniform value), and a spatially varying coupling density produces a
piecewise profile following the coupling staircase, with the local
conductivity tracking omega^2 / lambda(x).
"""

import numpy as np

from crystalheat import ChainParams, CouplingProfile, kappa_closed_form, nonuniform_transport

kappa = kappa_closed_form(ChainParams(1.0, 1.0, 1.0, 2)).kappa
print("uniform-coupling bulk conductivity:", kappa)

print("\nevery-2nd coupling at N = 65 (expect ~2x):")
p65 = ChainParams(1.0, 1.0, 1.0, 65)
rep = nonuniform_transport(p65, CouplingProfile.every_mth(1.0, 2, 65), 2.0, 1.0)
print("  (N-1)J/(TL-TR)        =", rep.kappa_estimate)
print("  2 * kappa             =", 2.0 * kappa)
print("  averaged-coupling id. =", rep.identity_residual, "(total-current identity)")
print("  current spread        =", rep.current_spread)
print("  zero-stretch flatness =", max(rep.zero_stretch_flatness))

print("\npiecewise coupling density 0.5 | 1.5 at N = 64:")
n = 64
p = ChainParams(1.0, 1.0, 1.0, n)
lams = np.where(np.arange(n) < n // 2, 0.5, 1.5)
rep = nonuniform_transport(p, CouplingProfile(lams), 2.0, 1.0)
print("  profile vs staircase prediction, max deviation:", rep.profile_deviation)
print("  local conductivity (bond averages away from walls/interface):")
for name, sl in (("lam = 0.5 side", slice(8, 24)), ("lam = 1.5 side", slice(40, 56))):
    est = rep.kappa_x_estimate[sl]
    pred = rep.kappa_x_prediction[sl][0]
    print(f"    {name}: estimate ~ {np.mean(est):.5f}  prediction {pred:.5f}  "
          f"(rel dev {abs(np.mean(est) - pred)/pred:.1%})")

print("\nprofile head/mid/tail:",
      np.round(rep.solution.profile.temps[[0, 15, 31, 32, 48, 63]], 4))
print("(steeper where the coupling density is higher)")
