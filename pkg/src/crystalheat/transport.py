"""Steady-state currents, reservoir fluxes and thermal conductivity.

Bond currents come from the cross covariance block, reservoir fluxes from the
kinetic-temperature mismatch, and the macroscopic conductivity from a closed
form, an equivalent integral, and finite-size extrapolation of self-consistent
steady currents.  Non-uniform coupling profiles get the averaged-coupling
current identity and the coupling-staircase profile prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate

from .covariance import (
    CovarianceBlocks,
    TemperatureProfile,
    covariance_closed_form,
    lyapunov_dense_blocks,
)
from .model import Array, ChainParams, CouplingProfile, build_phi
from .selfconsistency import (
    KineticMap,
    SelfConsistentSolution,
    solve_profile,
    solve_profile_general,
)


@dataclass
class KappaResult:
    """A conductivity value, labelled by the route that produced it."""

    kappa: float
    nu2: float
    route: str


@dataclass
class TransportReport:
    """Per-site transport data of one steady state."""

    currents: Array
    reservoir_fluxes: Array
    j_n: float
    current_spread: float
    epsilon_n: float
    kappa_estimate: float | None
    linearity_residual: float

    def as_dict(self) -> dict:
        return {
            "currents": [float(x) for x in self.currents],
            "reservoir_fluxes": [float(x) for x in self.reservoir_fluxes],
            "j_n": float(self.j_n),
            "current_spread": float(self.current_spread),
            "epsilon_n": float(self.epsilon_n),
            "kappa_estimate": None
            if self.kappa_estimate is None
            else float(self.kappa_estimate),
            "linearity_residual": float(self.linearity_residual),
        }


def _u_route_currents(u: Array, omega: float, lam_pair: Array) -> Array:
    """Currents from the position block: omega^2 (Phi U - U Phi)_{i,i+1} / lam-sum.

    ``lam_pair`` holds lambda_i + lambda_{i+1} per bond (2*lam uniform case).
    Out-of-range entries of U count as zero.
    """
    n = u.shape[0]
    upad = np.zeros((n + 2, n + 2))
    upad[1:-1, 1:-1] = u
    i = np.arange(1, n)  # 1-based bond index i = 1..N-1
    numer = (
        upad[i, i]
        + upad[i, i + 2]
        - upad[i - 1, i + 1]
        - upad[i + 1, i + 1]
    )
    return omega**4 * numer / lam_pair


def currents_from_covariance(
    s: CovarianceBlocks,
    params: ChainParams,
    couplings: CouplingProfile | None = None,
    check_dual: bool = True,
    dual_tol: float = 1e-9,
) -> Array:
    """Mean bond currents J_i = omega^2 Z_{i,i+1} of a stationary covariance.

    When the covariance solves the stationarity equations the equivalent
    position-block formula must agree; the cross-check is asserted by default
    (pairwise coupling sums are used for non-uniform profiles).
    """
    n = s.n
    if n < 2:
        raise ValueError("currents need at least 2 sites")
    idx = np.arange(n - 1)
    currents = params.omega**2 * s.z[idx, idx + 1]
    if check_dual:
        if couplings is None or couplings.is_uniform:
            lam = params.lam if couplings is None else float(couplings.lambdas[0])
            lam_pair = np.full(n - 1, 2.0 * lam)
        else:
            lams = couplings.lambdas
            lam_pair = lams[:-1] + lams[1:]
        if np.any(lam_pair <= 0.0):
            raise ValueError("dual current check needs a positive coupling per bond")
        alt = _u_route_currents(s.u, params.omega, lam_pair)
        err = float(np.max(np.abs(alt - currents)))
        if err > dual_tol * max(1.0, float(np.max(np.abs(currents)))):
            raise RuntimeError(
                f"current formulas disagree by {err:.2e}; covariance is not stationary"
            )
    return currents


def reservoir_fluxes(
    s: CovarianceBlocks, temps: TemperatureProfile, couplings: CouplingProfile
) -> Array:
    """Mean energy flux lambda_i (T_i - V_ii) from each reservoir into the chain."""
    if s.n != temps.n or s.n != couplings.n:
        raise ValueError("inconsistent sizes")
    return couplings.lambdas * (temps.temps - np.diag(s.v))


def kappa_closed_form(params: ChainParams) -> KappaResult:
    """Bulk conductivity omega^2/lam / (2 + nu^2 + sqrt(nu^2 (4 + nu^2)))."""
    if params.lam <= 0.0:
        raise ValueError("conductivity requires a positive coupling")
    nu2 = params.nu2
    kappa = (params.omega**2 / params.lam) / (
        2.0 + nu2 + math.sqrt(nu2 * (4.0 + nu2))
    )
    return KappaResult(kappa=kappa, nu2=nu2, route="closed_form")


def kappa_integral(params: ChainParams, match_tol: float = 1e-10) -> KappaResult:
    """Conductivity from the limiting corner element of the inverse force matrix.

    Evaluates (omega^2/lam) * Int_0^1 sin^2(pi x) / (nu^2 + 4 sin^2(pi x/2)) dx
    by adaptive quadrature and cross-checks the closed form.
    """
    if params.lam <= 0.0:
        raise ValueError("conductivity requires a positive coupling")
    nu2 = params.nu2

    def integrand(x):
        return math.sin(math.pi * x) ** 2 / (nu2 + 4.0 * math.sin(math.pi * x / 2.0) ** 2)

    val, err = scipy.integrate.quad(integrand, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)
    if err > 1e-12:
        raise RuntimeError(f"conductivity quadrature error {err:.2e} too large")
    kappa = params.omega**2 / params.lam * val
    ref = kappa_closed_form(params).kappa
    if abs(kappa - ref) > match_tol * max(1.0, abs(ref)):
        raise RuntimeError(
            f"integral route {kappa!r} disagrees with closed form {ref!r}"
        )
    return KappaResult(kappa=kappa, nu2=nu2, route="integral")


def richardson_extrapolate(ns, vals, max_points: int = 3) -> float:
    """Polynomial-in-1/N extrapolation to N -> infinity through the largest sizes."""
    ns = np.asarray(ns, dtype=float)
    vals = np.asarray(vals, dtype=float)
    if ns.size != vals.size or ns.size == 0:
        raise ValueError("need matching nonempty sequences")
    order = np.argsort(ns)
    ns, vals = ns[order], vals[order]
    ns, vals = ns[-max_points:], vals[-max_points:]
    h = 1.0 / ns
    # Neville evaluation of the interpolating polynomial at h = 0.
    tableau = vals.astype(float).copy()
    for level in range(1, h.size):
        for i in range(h.size - level):
            tableau[i] = (
                h[i + level] * tableau[i] - h[i] * tableau[i + 1]
            ) / (h[i + level] - h[i])
    return float(tableau[0])


@dataclass
class FiniteNConductivity:
    """Self-consistent conductivity estimates along a sequence of chain lengths."""

    entries: list[tuple[int, float]]
    extrapolated: float
    target: float


def finite_n_conductivity(
    params: ChainParams, t_left: float, t_right: float, n_values
) -> FiniteNConductivity:
    """Finite-size conductivity (N-1) J / (T_L - T_R) along ``n_values``.

    At each size the steady current is evaluated both from the cross block and
    from the end elements of the position block; the two must agree to 1e-9.
    """
    if t_left == t_right:
        raise ValueError("finite-size conductivity needs distinct end temperatures")
    entries = []
    for n in n_values:
        chain = ChainParams(params.omega, params.gamma, params.lam, int(n))
        sol = solve_profile(chain, t_left, t_right, method="direct")
        blocks = covariance_closed_form(chain, sol.profile)
        currents = currents_from_covariance(blocks, chain)
        j_n = float(np.mean(currents))
        total_u = (
            chain.omega**4
            / (2.0 * chain.lam)
            * (blocks.u[0, 0] - blocks.u[-1, -1])
        )
        if abs((n - 1) * j_n - total_u) > 1e-9 * max(1.0, abs(total_u)):
            raise RuntimeError(
                f"total-current identity violated at n={n}: "
                f"{(n - 1) * j_n!r} vs {total_u!r}"
            )
        entries.append((int(n), (n - 1) * j_n / (t_left - t_right)))
    extrapolated = richardson_extrapolate(
        [n for n, _ in entries], [v for _, v in entries]
    )
    return FiniteNConductivity(
        entries=entries,
        extrapolated=extrapolated,
        target=kappa_closed_form(params).kappa,
    )


def steady_state_report(
    params: ChainParams, solution: SelfConsistentSolution
) -> TransportReport:
    """Assemble the per-site transport report for a uniformly coupled steady state."""
    chain = params
    blocks = covariance_closed_form(chain, solution.profile)
    couplings = CouplingProfile.uniform(chain.lam, chain.n)
    currents = currents_from_covariance(blocks, chain)
    fluxes = reservoir_fluxes(blocks, solution.profile, couplings)
    j_n = float(np.mean(currents))
    spread = float(np.max(currents) - np.min(currents))
    t_left, t_right = solution.profile.t_left, solution.profile.t_right
    kappa_est = None
    if t_left != t_right:
        kappa_est = (chain.n - 1) * j_n / (t_left - t_right)
    linear = np.linspace(t_left, t_right, chain.n)
    return TransportReport(
        currents=currents,
        reservoir_fluxes=fluxes,
        j_n=j_n,
        current_spread=spread,
        epsilon_n=solution.profile.max_jump(),
        kappa_estimate=kappa_est,
        linearity_residual=float(np.max(np.abs(solution.profile.temps - linear))),
    )


def epsilon_and_bounds(
    solution: SelfConsistentSolution, kmap: KineticMap, params: ChainParams
):
    """Maximum profile jump eps_N, its current-based bound, and their ratio.

    The bound is sqrt(c_g/lam * (T_L - T_R) * J^(N)); entropy production makes
    the product under the root nonnegative.
    """
    profile = solution.profile
    eps_n = profile.max_jump()
    blocks = covariance_closed_form(params, profile)
    currents = currents_from_covariance(blocks, params)
    j_n = float(np.mean(currents))
    product = (profile.t_left - profile.t_right) * j_n
    bound = math.sqrt(max(kmap.c_g / params.lam * product, 0.0))
    ratio = eps_n / bound if bound > 0.0 else 0.0
    return eps_n, bound, ratio


@dataclass
class LinearityReport:
    residual: float
    inverse_identity_error: float


def profile_linearity(
    solution: SelfConsistentSolution, params: ChainParams
) -> LinearityReport:
    """Deviation of the profile from the linear interpolant, plus an exact identity.

    Also verifies (Phi^-1)_{j-1,j+1} = (Phi^-1)_{jj} - (Phi^-1)_{11} for every
    interior j, the identity behind asymptotic profile linearity.
    """
    temps = solution.profile.temps
    n = temps.size
    linear = np.linspace(solution.profile.t_left, solution.profile.t_right, n)
    residual = float(np.max(np.abs(temps - linear)))

    phi_inv = np.linalg.inv(build_phi(params))
    j = np.arange(1, params.n - 1)  # 0-based interior
    identity_err = (
        float(np.max(np.abs(phi_inv[j - 1, j + 1] - (np.diag(phi_inv)[j] - phi_inv[0, 0]))))
        if j.size
        else 0.0
    )
    if identity_err > 1e-10:
        raise RuntimeError(
            f"inverse force-matrix identity violated by {identity_err:.2e}"
        )
    return LinearityReport(residual=residual, inverse_identity_error=identity_err)


@dataclass
class NonuniformTransportReport:
    """Transport data for a non-uniform coupling profile."""

    solution: SelfConsistentSolution
    j_n: float
    current_spread: float
    lambda_bar: float
    kappa_estimate: float | None
    kappa_bar_target: float
    identity_residual: float
    staircase_x: Array
    staircase: Array
    profile_prediction: Array
    profile_deviation: float
    kappa_x_estimate: Array = field(default_factory=lambda: np.zeros(0))
    kappa_x_prediction: Array = field(default_factory=lambda: np.zeros(0))
    zero_stretch_flatness: list[float] = field(default_factory=list)


def coupling_staircase(couplings: CouplingProfile):
    """Left-continuous empirical staircase (1/N) sum_{i <= N x} lambda_i at x = j/N."""
    n = couplings.n
    x = np.arange(1, n + 1) / n
    return x, np.cumsum(couplings.lambdas) / n


def zero_coupling_stretches(couplings: CouplingProfile) -> list[tuple[int, int]]:
    """Maximal runs [start, stop) of zero-coupling sites (0-based indices)."""
    stretches = []
    start = None
    for i, lam in enumerate(couplings.lambdas):
        if lam == 0.0 and start is None:
            start = i
        elif lam != 0.0 and start is not None:
            stretches.append((start, i))
            start = None
    if start is not None:
        stretches.append((start, couplings.n))
    return stretches


def nonuniform_transport(
    params: ChainParams,
    couplings: CouplingProfile,
    t_left: float,
    t_right: float,
) -> NonuniformTransportReport:
    """Solve and characterize transport for a non-uniform coupling profile.

    Verifies the averaged-coupling total-current identity
    2 (N-1) lambda_bar J / omega^4 = U_11 - U_NN and compares the converged
    profile against the staircase prediction T_L - (T_L - T_R) Lam(x)/Lam(1).
    """
    n = params.n
    sol = solve_profile_general(params, couplings, t_left, t_right)
    blocks = lyapunov_dense_blocks(params, couplings, sol.profile)
    currents = currents_from_covariance(blocks, params, couplings=couplings)
    j_n = float(np.mean(currents))
    spread = float(np.max(currents) - np.min(currents))

    lams = couplings.lambdas
    lambda_bar = (float(np.sum(lams)) - (lams[0] + lams[-1]) / 2.0) / (n - 1)
    lhs = 2.0 * (n - 1) * lambda_bar * j_n / params.omega**4
    rhs = blocks.u[0, 0] - blocks.u[-1, -1]
    identity_residual = abs(lhs - rhs)
    if identity_residual > 1e-8 * max(1.0, abs(rhs)):
        raise RuntimeError(
            f"averaged-coupling current identity violated by {identity_residual:.2e}"
        )

    x, stair = coupling_staircase(couplings)
    prediction = t_left - (t_left - t_right) * stair / stair[-1]
    deviation = float(np.max(np.abs(sol.profile.temps - prediction)))

    kappa_est = None
    if t_left != t_right:
        kappa_est = (n - 1) * j_n / (t_left - t_right)
    nu2 = params.nu2
    kappa_bar_target = (params.omega**2 / lambda_bar) / (
        2.0 + nu2 + math.sqrt(nu2 * (4.0 + nu2))
    )

    # Local conductivity profile: Fourier's law per bond against the
    # bond-averaged coupling density (infinite on zero-coupling bonds).
    temps = sol.profile.temps
    jumps = n * (temps[:-1] - temps[1:])
    with np.errstate(divide="ignore"):
        kappa_x_est = np.where(
            np.abs(jumps) > 1e-15 * max(1.0, abs(t_left - t_right)),
            (n - 1) * j_n / np.where(jumps != 0.0, jumps, 1.0),
            np.inf,
        )
        lam_bond = (lams[:-1] + lams[1:]) / 2.0
        kappa_x_pred = np.where(
            lam_bond > 0.0,
            (params.omega**2 / np.where(lam_bond > 0.0, lam_bond, 1.0))
            / (2.0 + nu2 + math.sqrt(nu2 * (4.0 + nu2))),
            np.inf,
        )
    flatness = [
        float(np.max(sol.profile.temps[a:b]) - np.min(sol.profile.temps[a:b]))
        for a, b in zero_coupling_stretches(couplings)
    ]
    return NonuniformTransportReport(
        solution=sol,
        j_n=j_n,
        current_spread=spread,
        lambda_bar=lambda_bar,
        kappa_estimate=kappa_est,
        kappa_bar_target=kappa_bar_target,
        identity_residual=identity_residual,
        staircase_x=x,
        staircase=stair,
        profile_prediction=prediction,
        profile_deviation=deviation,
        kappa_x_estimate=kappa_x_est,
        kappa_x_prediction=kappa_x_pred,
        zero_stretch_flatness=flatness,
    )
