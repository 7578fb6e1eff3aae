"""Self-consistent reservoir temperatures and the structure behind uniqueness.

Solves T_i = <p_i^2> with pinned end temperatures, shows that the kinetic map
is doubly stochastic with an interior contraction below one, and that the
converged profile is linear up to the maximum nearest-neighbour jump.
"""

import numpy as np

from crystalheat import (
    ChainParams,
    contraction_norm,
    kinetic_map,
    profile_linearity,
    solve_profile,
    steady_state_report,
)

params = ChainParams(omega=1.0, gamma=1.0, lam=1.0, n=48)
t_left, t_right = 2.0, 1.0

kmap = kinetic_map(params)
print("kinetic map M: row-sum error", np.max(np.abs(kmap.m.sum(axis=1) - 1.0)))
print("               min entry    ", kmap.m.min())
print("interior contraction |Q|   =", contraction_norm(kmap))

direct = solve_profile(params, t_left, t_right, method="direct")
neumann = solve_profile(params, t_left, t_right, method="neumann")
print("\ndirect vs Neumann profile gap:",
      np.max(np.abs(direct.profile.temps - neumann.profile.temps)),
      f"(Neumann used {neumann.iterations} terms)")

temps = direct.profile.temps
print("\nprofile head:", np.round(temps[:6], 5))
print("profile tail:", np.round(temps[-6:], 5))
print("bracketed by [T_R, T_L]:", temps.min() >= t_right and temps.max() <= t_left)

rep = steady_state_report(params, direct)
lin = profile_linearity(direct, params)
print("\nsteady current J =", rep.j_n, " spread", rep.current_spread)
print("interior reservoir fluxes vanish:", np.max(np.abs(rep.reservoir_fluxes[1:-1])))
print("linearity residual:", lin.residual, " max T jump eps_N:", rep.epsilon_n)

print("\nprofile linearity improves with length:")
for n in (16, 32, 64, 128):
    p = ChainParams(1.0, 1.0, 1.0, n)
    sol = solve_profile(p, t_left, t_right)
    print(f"  N={n:4d} residual={profile_linearity(sol, p).residual:.3e} "
          f"eps_N={sol.profile.max_jump():.3e}")
