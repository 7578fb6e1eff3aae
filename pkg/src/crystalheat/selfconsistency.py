"""Self-consistent reservoir temperatures: kinetic map, contraction, and solvers.

The map from imposed reservoir temperatures to kinetic temperatures (momentum
variances) is linear with a symmetric doubly stochastic matrix M; pinning the
end temperatures and requiring zero mean energy exchange at interior sites
turns the steady-state condition into a strictly contractive fixed-point
problem on the interior, solved here by Neumann iteration or directly.
Variants cover non-uniform coupling profiles (via dense Lyapunov solves) and
transverse-mode-averaged maps for higher-dimensional lattices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covariance import TemperatureProfile, _kernel_grid, g_function, lyapunov_dense
from .model import (
    Array,
    ChainParams,
    CouplingProfile,
    build_drift,
    build_noise,
    shifted_params,
    spectral_data,
    transverse_mode_shifts,
)


class ConvergenceError(RuntimeError):
    """Raised when an iterative profile solver fails to reach its tolerance."""


@dataclass
class KineticMap:
    """Linear map M from imposed to kinetic temperatures, with its contraction data.

    q_norm is the spectral norm of the interior restriction of M and c_g an
    upper-bound constant with G(x, y) <= c_g / 2 on the closed square.
    """

    m: Array
    q_norm: float
    c_g: float

    @property
    def n(self) -> int:
        return self.m.shape[0]


def _g_max(params: ChainParams, grid_points: int = 401) -> float:
    x = np.linspace(-1.0, 1.0, grid_points)
    return float(np.max(g_function(x[:, None], x[None, :], params)))


def kinetic_map(params: ChainParams, validate: bool = True) -> KineticMap:
    """Build M_ij = V_ii^(j) from the spectral kernel of the momentum block.

    M is symmetric, entrywise nonnegative and doubly stochastic; these
    properties are checked on construction.
    """
    if params.lam <= 0.0:
        raise ValueError("kinetic map requires a positive uniform coupling")
    n = params.n
    sd = spectral_data(params)
    kern = _kernel_grid("V", params, sd.c)
    # M = H diag(kern) H^T with H_(i,(k,l)) = F_ik F_il.
    h = (sd.f[:, :, None] * sd.f[:, None, :]).reshape(n, n * n)
    m = (h * kern.ravel()) @ h.T
    m = (m + m.T) / 2.0
    if validate:
        row_err = float(np.max(np.abs(m.sum(axis=1) - 1.0)))
        if row_err > 1e-10:
            raise RuntimeError(f"kinetic map row sums off by {row_err:.2e}")
        if float(m.min()) < -1e-12:
            raise RuntimeError(f"kinetic map has negative entry {m.min():.2e}")
    q_norm = _interior_norm(m)
    c_g = 2.0 * _g_max(params) * 1.01
    return KineticMap(m=m, q_norm=q_norm, c_g=c_g)


def _interior_norm(m: Array) -> float:
    if m.shape[0] <= 2:
        return 0.0
    return float(np.linalg.norm(m[1:-1, 1:-1], 2))


def contraction_norm(kmap: KineticMap) -> float:
    """Spectral norm of the interior-restricted map; strictly below one."""
    q = _interior_norm(kmap.m)
    if q >= 1.0:
        raise RuntimeError(f"interior contraction norm {q} is not < 1")
    return q


@dataclass
class SelfConsistentSolution:
    """A solved temperature profile together with solver diagnostics."""

    profile: TemperatureProfile
    method: str
    iterations: int
    residual: float
    coupled: Array | None = None
    kinetic_temps: Array | None = None

    @property
    def n(self) -> int:
        return self.profile.n


def _interior_residual(m: Array, temps: Array) -> float:
    if temps.size <= 2:
        return 0.0
    return float(np.max(np.abs(temps - m @ temps)[1:-1]))


def _initial_interior(init, t_left: float, t_right: float, n_int: int) -> Array:
    if isinstance(init, str):
        if init == "linear":
            return np.linspace(t_left, t_right, n_int + 2)[1:-1]
        if init == "flat_left":
            return np.full(n_int, t_left)
        if init == "flat_right":
            return np.full(n_int, t_right)
        raise ValueError(f"unknown init {init!r}")
    arr = np.asarray(init, dtype=float)
    if arr.shape != (n_int,):
        raise ValueError("init array must have one entry per interior site")
    return arr.copy()


def solve_profile(
    params: ChainParams,
    t_left: float,
    t_right: float,
    method: str = "direct",
    init="linear",
    max_iterations: int = 2_000_000,
) -> SelfConsistentSolution:
    """Unique self-consistent profile for a uniformly coupled chain.

    The normalized problem with end temperatures (1, 0) is solved once and
    rescaled, since kinetic temperatures depend affinely on the imposed ones.
    ``method`` picks the constructive Neumann series (tolerance 1e-10) or a
    direct interior solve (tolerance 1e-12); the Neumann iteration may be
    started from "linear", "flat_left", "flat_right" or an explicit interior
    vector.
    """
    if t_left < 0.0 or t_right < 0.0:
        raise ValueError("end temperatures must be nonnegative")
    if method not in ("neumann", "direct"):
        raise ValueError(f"unknown method {method!r}")
    kmap = kinetic_map(params)
    return solve_profile_from_map(
        kmap, t_left, t_right, method=method, init=init, max_iterations=max_iterations
    )


def solve_profile_from_map(
    kmap: KineticMap,
    t_left: float,
    t_right: float,
    method: str = "direct",
    init="linear",
    max_iterations: int = 2_000_000,
    residual_tol: float | None = None,
) -> SelfConsistentSolution:
    """Solve the interior fixed point for an explicit (mode-averaged) kinetic map."""
    m = kmap.m
    n = kmap.n
    tol = residual_tol if residual_tol is not None else (
        1e-12 if method == "direct" else 1e-10
    )
    if n <= 2:
        temps = np.array([t_left, t_right][:n], dtype=float)
        profile = TemperatureProfile(temps, t_left, float(temps[-1]))
        return SelfConsistentSolution(profile, method, 0, 0.0)
    if t_left == t_right:
        # Row sums are one, so the constant profile is the exact fixed point.
        profile = TemperatureProfile.uniform(t_left, n)
        return SelfConsistentSolution(profile, method, 0, _interior_residual(m, profile.temps))

    scale = t_left - t_right
    iterations = 0
    if method == "direct":
        interior = np.linalg.solve(
            np.eye(n - 2) - m[1:-1, 1:-1],
            m[1:-1, 0] * t_left + m[1:-1, -1] * t_right,
        )
        iterations = 1
    else:
        # Neumann series on the (1, 0)-normalized problem: a <- Q a + b.  The
        # truncated tail is bounded by increment/(1 - |Q|), so the increment
        # threshold carries the contraction gap to keep the fixed-point error
        # itself near 1e-12 regardless of the starting profile.
        q = m[1:-1, 1:-1]
        b = m[1:-1, 0].copy()
        a = (_initial_interior(init, t_left, t_right, n - 2) - t_right) / scale
        q_norm = kmap.q_norm
        gap = max(1.0 - q_norm, 1e-6)
        threshold = max(1e-12 * gap, 1e-15)
        if 0.0 < q_norm < 1.0:
            n_max = int(math.ceil(math.log(threshold) / math.log(q_norm))) + 1
        else:
            n_max = max_iterations
        n_max = min(max(n_max, 1), max_iterations)
        increment = np.inf
        stalled = 0
        while increment > threshold:
            a_next = q @ a + b
            new_increment = float(np.max(np.abs(a_next - a)))
            stalled = stalled + 1 if new_increment >= increment else 0
            increment = new_increment
            a = a_next
            iterations += 1
            if stalled >= 50:  # at the floating-point floor
                break
            if iterations >= n_max:
                if increment > 1e-12:
                    raise ConvergenceError(
                        f"Neumann iteration stalled after {iterations} terms "
                        f"(increment {increment:.2e}); interior norm may be >= 1"
                    )
                break
        interior = t_right + scale * a

    temps = np.concatenate([[t_left], interior, [t_right]])
    residual = _interior_residual(m, temps)
    if residual > tol * max(1.0, abs(t_left), abs(t_right)):
        raise ConvergenceError(
            f"profile residual {residual:.2e} exceeds tolerance {tol:.0e}"
        )
    profile = TemperatureProfile(temps, t_left, t_right)
    return SelfConsistentSolution(profile, method, iterations, residual)


def _interpolate_uncoupled(temps: Array, coupled: Array) -> Array:
    """Replace temperatures at uncoupled sites by interpolation between coupled ones."""
    out = temps.copy()
    idx = np.flatnonzero(coupled)
    if idx.size == 0:
        return out
    pos = np.arange(temps.size, dtype=float)
    out[~coupled] = np.interp(pos[~coupled], pos[idx], temps[idx])
    return out


def _kinetic_temperatures(
    params: ChainParams, couplings: CouplingProfile, temps: Array
) -> Array:
    a = build_drift(params, couplings)
    sigma2 = build_noise(couplings, TemperatureProfile.from_values(temps))
    s = lyapunov_dense(a, sigma2)
    n = params.n
    return np.diag(s[n:, n:]).copy()


def solve_profile_general(
    params: ChainParams,
    couplings: CouplingProfile,
    t_left: float,
    t_right: float,
    method: str = "direct",
    max_iterations: int = 10_000,
    tol: float = 1e-9,
) -> SelfConsistentSolution:
    """Self-consistent profile for an arbitrary coupling profile.

    Kinetic temperatures still depend affinely on the imposed ones, but the
    response matrix has no closed form, so its columns are assembled from one
    dense Lyapunov solve per coupled site and the interior system is solved
    directly (sites with zero coupling impose no condition and receive
    interpolated temperatures for reporting only).  ``method="fixed_point"``
    instead runs the damped iteration, which is kept for cross-checking at
    small sizes; it converges too slowly for long chains.
    """
    n = params.n
    if couplings.n != n:
        raise ValueError("coupling profile length differs from chain length")
    couplings.require_dissipative()
    if t_left < 0.0 or t_right < 0.0:
        raise ValueError("end temperatures must be nonnegative")

    # Stability check of the damped drift before any Lyapunov work.
    a = build_drift(params, couplings)
    min_real = float(np.min(np.linalg.eigvals(a).real))
    if min_real <= 1e-12:
        raise ConvergenceError(
            f"drift is not stable for this coupling profile (min Re = {min_real:.2e})"
        )

    coupled = couplings.lambdas > 0.0
    free = coupled.copy()
    free[0] = free[-1] = False
    free_idx = np.flatnonzero(free)

    temps = np.linspace(t_left, t_right, n)
    temps[0], temps[-1] = t_left, t_right
    iterations = 0

    if method == "direct":
        # Column j of the response matrix: kinetic temperatures for T = e_j.
        cols = {}
        for j in np.flatnonzero(coupled):
            unit = np.zeros(n)
            unit[j] = 1.0
            cols[int(j)] = _kinetic_temperatures(params, couplings, unit)
            iterations += 1
        if free_idx.size:
            m_ff = np.column_stack([cols[int(j)] for j in free_idx])[free_idx, :]
            rhs = np.zeros(free_idx.size)
            for j in (0, n - 1):
                if coupled[j]:
                    rhs += cols[j][free_idx] * temps[j]
            solved = np.linalg.solve(np.eye(free_idx.size) - m_ff, rhs)
            temps[free_idx] = solved
    elif method == "fixed_point":
        theta = 0.5
        prev_residual_vec = None
        for iterations in range(1, max_iterations + 1):
            v_diag = _kinetic_temperatures(params, couplings, temps)
            residual_vec = (v_diag - temps)[free_idx]
            if residual_vec.size == 0 or float(np.max(np.abs(residual_vec))) <= tol:
                break
            if prev_residual_vec is not None and float(
                np.dot(residual_vec, prev_residual_vec)
            ) < 0.0:
                theta /= 2.0
            temps[free_idx] += theta * residual_vec
            prev_residual_vec = residual_vec
        else:
            raise ConvergenceError(
                f"fixed point not converged after {max_iterations} iterations "
                f"(damping {theta})"
            )
    else:
        raise ValueError(f"unknown method {method!r}")

    kinetic = _kinetic_temperatures(params, couplings, temps)
    residual = (
        float(np.max(np.abs((kinetic - temps)[free_idx]))) if free_idx.size else 0.0
    )
    if residual > tol:
        raise ConvergenceError(
            f"general profile residual {residual:.2e} exceeds tolerance {tol:.0e}"
        )
    reported = _interpolate_uncoupled(temps, coupled)
    reported[0], reported[-1] = t_left, t_right
    profile = TemperatureProfile(reported, t_left, t_right)
    return SelfConsistentSolution(
        profile,
        "direct" if method == "direct" else "neumann",
        iterations,
        residual,
        coupled=coupled,
        kinetic_temps=kinetic,
    )


def averaged_kinetic_map(params: ChainParams, n_transverse) -> KineticMap:
    """Transverse-mode average of the kinetic map for a periodic crystal slab."""
    shifts = transverse_mode_shifts(n_transverse)
    m_sum = np.zeros((params.n, params.n))
    c_g = 0.0
    for shift in shifts:
        kmap = kinetic_map(shifted_params(params, float(shift)))
        m_sum += kmap.m
        c_g = max(c_g, kmap.c_g)
    m_avg = m_sum / shifts.size
    return KineticMap(m=m_avg, q_norm=_interior_norm(m_avg), c_g=c_g)


def solve_profile_highdim(
    params: ChainParams, n_transverse, t_left: float, t_right: float
) -> SelfConsistentSolution:
    """Self-consistent profile of a crystal with periodic transverse directions.

    The profile is constant along the transverse directions, so only the
    longitudinal values are represented; the kinetic map is replaced by its
    average over transverse wavevectors and solved directly.
    """
    kmap = averaged_kinetic_map(params, n_transverse)
    return solve_profile_from_map(
        kmap, t_left, t_right, method="direct", residual_tol=1e-12
    )
