"""Higher-dimensional crystals: mode decoupling, conductivity integrals, asymptotics.

A crystal with periodic transverse directions Fourier-decouples into chains
whose pinning ratio is shifted per transverse wavevector, so the conductivity
is a mode average of the chain closed form; in the infinite transverse limit
it becomes an integral over the transverse Brillouin zone, with a
one-dimensional exponential representation that stays tractable for large
dimension and gives the 1/(4d) asymptotics.  A direct dense solve of the full
two-dimensional lattice validates the reduction at small sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.special

from .covariance import (
    TemperatureProfile,
    covariance_closed_form,
    lyapunov_dense,
)
from .model import (
    Array,
    ChainParams,
    shifted_params,
    transverse_mode_shifts,
)
from .selfconsistency import ConvergenceError
from .transport import KappaResult, currents_from_covariance, kappa_closed_form

ORACLE_SITE_CAP = 4096


@dataclass
class LatticeSpec:
    """A crystal slab: Dirichlet longitudinal direction plus periodic transverse sizes."""

    n_long: int
    n_transverse: tuple[int, ...]
    params: ChainParams

    def __post_init__(self):
        self.n_transverse = tuple(int(m) for m in np.atleast_1d(self.n_transverse))
        if self.n_long < 2:
            raise ValueError("need at least 2 longitudinal sites")
        if self.n_long != self.params.n:
            raise ValueError("params.n must equal n_long")
        if any(m < 1 for m in self.n_transverse):
            raise ValueError("transverse sizes must be >= 1")

    @property
    def total_sites(self) -> int:
        return self.n_long * int(np.prod(self.n_transverse))


@dataclass
class ModeSet:
    """Shifted pinning ratios nu(k)^2 over all transverse wavevectors."""

    nus2: Array


def mode_set(spec: LatticeSpec) -> ModeSet:
    """Enumerate nu(k)^2 = nu^2 + 2 sum_i (1 - cos(2 pi k_i/N'_i)) over wavevectors."""
    shifts = transverse_mode_shifts(spec.n_transverse)
    return ModeSet(nus2=spec.params.nu2 + shifts)


def _kappa_of_nu2(omega: float, lam: float, nu2) -> Array:
    nu2 = np.asarray(nu2, dtype=float)
    return (omega**2 / lam) / (2.0 + nu2 + np.sqrt(nu2 * (4.0 + nu2)))


def kappa_highdim_sum(spec: LatticeSpec) -> KappaResult:
    """Conductivity of the slab as the mode average of per-chain closed forms."""
    p = spec.params
    if p.lam <= 0.0:
        raise ValueError("conductivity requires a positive coupling")
    modes = mode_set(spec)
    kappa = float(np.mean(_kappa_of_nu2(p.omega, p.lam, modes.nus2)))
    return KappaResult(kappa=kappa, nu2=p.nu2, route="mode_average")


def kappa_highdim_integral(
    params: ChainParams, d: int, prefer_tensor: bool | None = None
) -> KappaResult:
    """d-dimensional conductivity integral over the transverse Brillouin zone.

    Tensor-product adaptive quadrature handles d <= 4; higher dimensions route
    through the exponential representation, whose cost is dimension
    independent.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if params.lam <= 0.0:
        raise ValueError("conductivity requires a positive coupling")
    use_tensor = d <= 4 if prefer_tensor is None else prefer_tensor
    if d == 1:
        return KappaResult(
            kappa=kappa_closed_form(params).kappa, nu2=params.nu2, route="integral"
        )
    if use_tensor and d <= 4:
        nu2 = params.nu2

        def integrand(*ys):
            shift = 2.0 * sum(1.0 - math.cos(2.0 * math.pi * y) for y in ys)
            v = nu2 + shift
            return 1.0 / (2.0 + v + math.sqrt(v * (4.0 + v)))

        val, err = scipy.integrate.nquad(
            integrand,
            [(0.0, 1.0)] * (d - 1),
            opts={"epsabs": 1e-11, "epsrel": 1e-11},
        )
        if err > 1e-8:
            raise RuntimeError(f"tensor quadrature error {err:.2e} too large")
        kappa = params.omega**2 / params.lam * val
    else:
        kappa = params.omega**2 / params.lam * appendix_integral(params, d)
    return KappaResult(kappa=kappa, nu2=params.nu2, route="integral")


def bz_time_kernels(t):
    """The pair (I0, I1) of transverse Brillouin-zone time kernels.

    I0(t) = Int_0^1 exp(-4 t sin^2(pi y)) dy and I1 its sin^2(2 pi y)-weighted
    partner; both reduce to scaled modified Bessel functions, evaluated here
    without quadrature.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("t must be nonnegative")
    z = 2.0 * t
    i0 = scipy.special.ive(0, z)
    i1 = np.where(z > 0.0, scipy.special.ive(1, np.where(z > 0.0, z, 1.0)) / np.where(z > 0.0, z, 1.0), 0.5)
    return (i0, i1) if t.ndim else (float(i0), float(i1))


def _check_kernel_identities():
    i0_zero, i1_zero = bz_time_kernels(0.0)
    if abs(i0_zero - 1.0) > 1e-12 or abs(i1_zero - 0.5) > 1e-12:
        raise RuntimeError("time-kernel values at t = 0 are off")
    grid = np.geomspace(1e-6, 200.0, 64)
    i0, _ = bz_time_kernels(grid)
    if np.any(i0 > 1.0 / np.sqrt(1.0 + grid) + 1e-12):
        raise RuntimeError("I0 exceeds its 1/sqrt(1+t) envelope")


def appendix_integral(params: ChainParams, d: int) -> float:
    """The dimension-reduced conductivity integral I with kappa = (omega^2/lam) I.

    I = Int_0^infty exp(-t nu^2) I1(t) I0(t)^(d-1) dt, evaluated after the
    substitution s = t d so the integrand stays O(exp(-2s)) uniformly in d.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    _check_kernel_identities()
    nu2 = params.nu2

    def integrand(s):
        t = s / d
        i0, i1 = bz_time_kernels(t)
        return math.exp(-t * nu2) * i1 * i0 ** (d - 1) / d

    val, err = scipy.integrate.quad(
        integrand, 0.0, np.inf, epsabs=1e-12, epsrel=1e-12, limit=400
    )
    if err > 1e-8:
        raise RuntimeError(f"representation quadrature error {err:.2e} too large")
    return float(val)


def appendix_c_representation(params: ChainParams, d: int) -> float:
    """Alias returning the reduced integral I for dimension d."""
    return appendix_integral(params, d)


def asymptotic_check(params: ChainParams, d_values):
    """Tabulate d * I along ``d_values`` together with the distance from 1/4."""
    rows = []
    for d in d_values:
        val = d * appendix_integral(params, int(d))
        rows.append((int(d), float(val), abs(val - 0.25)))
    return rows


def _periodic_laplacian(m: int) -> Array:
    lap = -2.0 * np.eye(m)
    for j in range(m):
        lap[j, (j + 1) % m] += 1.0
        lap[j, (j - 1) % m] += 1.0
    return lap


def _dirichlet_laplacian(n: int) -> Array:
    lap = -2.0 * np.eye(n)
    idx = np.arange(n - 1)
    lap[idx, idx + 1] = 1.0
    lap[idx + 1, idx] = 1.0
    return lap


@dataclass
class LatticeOracleResult:
    """Direct dense solution of the two-dimensional self-consistent lattice."""

    profile: Array  # longitudinal temperatures tau_i
    temps_grid: Array  # (N, N') imposed temperatures
    kinetic_grid: Array  # (N, N') momentum variances
    j_long: Array  # (N-1, N') longitudinal bond currents
    j_trans: Array  # (N, N') transverse bond currents
    residual: float
    transverse_spread: float
    mode_sum_currents: Array  # (N-1,) decoupled-mode prediction per bond


def full_lattice_oracle(
    spec: LatticeSpec, t_left: float, t_right: float, tol: float = 1e-9
) -> LatticeOracleResult:
    """Solve the 2-d lattice self-consistently by dense Lyapunov solves.

    Supports one transverse direction.  Sites are ordered longitudinal-major
    (site (i, j) at index i*N' + j).  The converged state is checked for
    vanishing transverse currents and a transverse-constant profile, and the
    per-bond longitudinal currents are compared against the transverse-mode
    average of chain currents at the same profile.
    """
    if len(spec.n_transverse) != 1:
        raise ValueError("the dense oracle supports exactly one transverse direction")
    if spec.total_sites > ORACLE_SITE_CAP:
        raise ValueError(
            f"{spec.total_sites} sites exceed the oracle cap {ORACLE_SITE_CAP}"
        )
    p = spec.params
    if p.lam <= 0.0:
        raise ValueError("the oracle requires a positive uniform coupling")
    n, np_ = spec.n_long, spec.n_transverse[0]
    ns = n * np_
    lap = np.kron(_dirichlet_laplacian(n), np.eye(np_)) + np.kron(
        np.eye(n), _periodic_laplacian(np_)
    )
    phi2 = p.omega**2 * (p.nu2 * np.eye(ns) - lap)
    a = np.zeros((2 * ns, 2 * ns))
    a[:ns, ns:] = -np.eye(ns)
    a[ns:, :ns] = phi2
    a[ns:, ns:] = p.lam * np.eye(ns)

    def kinetic(tau: Array) -> Array:
        temps = np.repeat(tau, np_)
        sigma2 = np.zeros((2 * ns, 2 * ns))
        sigma2[ns:, ns:] = np.diag(2.0 * p.lam * temps)
        s = lyapunov_dense(a, sigma2)
        v_diag = np.diag(s[ns:, ns:]).reshape(n, np_)
        return v_diag.mean(axis=1)

    # Affine interior solve on the longitudinal profile (transverse-constant).
    cols = np.empty((n, n))
    for i in range(n):
        unit = np.zeros(n)
        unit[i] = 1.0
        cols[:, i] = kinetic(unit)
    tau = np.linspace(t_left, t_right, n)
    if n > 2:
        m_ff = cols[1:-1, 1:-1]
        rhs = cols[1:-1, 0] * t_left + cols[1:-1, -1] * t_right
        tau[1:-1] = np.linalg.solve(np.eye(n - 2) - m_ff, rhs)
    tau[0], tau[-1] = t_left, t_right

    temps = np.repeat(tau, np_)
    sigma2 = np.zeros((2 * ns, 2 * ns))
    sigma2[ns:, ns:] = np.diag(2.0 * p.lam * temps)
    s = lyapunov_dense(a, sigma2)
    v_diag = np.diag(s[ns:, ns:]).reshape(n, np_)
    z = s[:ns, ns:]

    residual = (
        float(np.max(np.abs(v_diag[1:-1] - tau[1:-1, None]))) if n > 2 else 0.0
    )
    if residual > tol:
        raise ConvergenceError(
            f"lattice self-consistency residual {residual:.2e} exceeds {tol:.0e}"
        )
    transverse_spread = float(np.max(np.ptp(v_diag, axis=1)))

    site = np.arange(ns).reshape(n, np_)
    j_long = p.omega**2 * z[site[:-1], site[1:]]
    j_trans = p.omega**2 * z[site, np.roll(site, -1, axis=1)]

    mode_currents = np.zeros(n - 1)
    for shift in transverse_mode_shifts(spec.n_transverse):
        chain = shifted_params(p, float(shift))
        blocks = covariance_closed_form(chain, TemperatureProfile.from_values(tau))
        mode_currents += currents_from_covariance(blocks, chain)
    mode_currents /= np_

    return LatticeOracleResult(
        profile=tau,
        temps_grid=temps.reshape(n, np_),
        kinetic_grid=v_diag,
        j_long=j_long,
        j_trans=j_trans,
        residual=residual,
        transverse_spread=transverse_spread,
        mode_sum_currents=mode_currents,
    )
