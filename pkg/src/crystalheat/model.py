"""Lattice matrices, spectral basis and propagator bounds for the damped chain.

This module builds every matrix that defines the Ornstein-Uhlenbeck dynamics
of a pinned harmonic chain coupled to Langevin reservoirs: the force matrix,
the drift and noise matrices, the bond-current matrix, and the sine eigenbasis
that diagonalizes the force matrix.  It also evaluates the decay envelope of
the propagator exp(-t*A) from the per-mode 2x2 closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

Array = NDArray[np.float64]

# Dense storage everywhere; chains larger than this are refused at construction.
MAX_SITES = 2000


@dataclass(frozen=True)
class ChainParams:
    """Physical parameters of the chain.

    Parameters
    ----------
    omega:
        Nearest-neighbour interaction frequency (> 0).
    gamma:
        On-site pinning frequency (> 0).  A vanishing pinning is rejected
        because the propagator decay rate would degrade with the chain length
        and every tolerance contract in this package assumes a spectral gap.
    lam:
        Default uniform reservoir coupling (>= 0).
    n:
        Number of sites.  Some operations (currents, conductivities) need
        n >= 2 and enforce it themselves.
    """

    omega: float
    gamma: float
    lam: float = 1.0
    n: int = 2

    def __post_init__(self):
        if not self.omega > 0.0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not self.gamma > 0.0:
            raise ValueError(
                f"gamma must be positive, got {self.gamma}; an unpinned chain has "
                "no length-uniform spectral gap"
            )
        if self.lam < 0.0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be an integer >= 1, got {self.n}")
        if self.n > MAX_SITES:
            raise ValueError(f"n = {self.n} exceeds the dense-storage cap {MAX_SITES}")

    @property
    def nu2(self) -> float:
        """Dimensionless pinning ratio gamma^2/omega^2."""
        return self.gamma**2 / self.omega**2

    @property
    def alpha_lower(self) -> float:
        """Uniform lower bound min(lam/2, gamma^2/lam) on the drift spectral abscissa."""
        if self.lam <= 0.0:
            raise ValueError("alpha_lower requires a positive coupling lam")
        return min(self.lam / 2.0, self.gamma**2 / self.lam)


@dataclass
class CouplingProfile:
    """Per-site reservoir couplings lambda_i >= 0."""

    lambdas: Array

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=float)
        if self.lambdas.ndim != 1:
            raise ValueError("lambdas must be a 1-d sequence")
        if np.any(self.lambdas < 0.0):
            raise ValueError("couplings must be nonnegative")

    @classmethod
    def uniform(cls, lam: float, n: int) -> "CouplingProfile":
        return cls(np.full(n, float(lam)))

    @classmethod
    def every_mth(cls, lam: float, m: int, n: int) -> "CouplingProfile":
        """lambda on sites 1, 1+m, 1+2m, ... and zero elsewhere."""
        lams = np.zeros(n)
        lams[::m] = float(lam)
        return cls(lams)

    @property
    def n(self) -> int:
        return self.lambdas.size

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.lambdas == self.lambdas[0]))

    @property
    def is_dissipative(self) -> bool:
        return bool(np.any(self.lambdas > 0.0))

    def require_dissipative(self):
        if not self.is_dissipative:
            raise ValueError("at least one coupling must be positive")

    def key(self) -> bytes:
        return self.lambdas.tobytes()


@dataclass
class SpectralData:
    """Sine eigenbasis of the force matrix.

    f is the orthogonal matrix F_kl = sqrt(2/(N+1)) sin(pi*k*l/(N+1)), mu the
    force-matrix eigenvalues and c the cosines cos(pi*k/(N+1)), k = 1..N.
    """

    f: Array
    mu: Array
    c: Array


def build_phi(params: ChainParams) -> Array:
    """Force matrix omega^2 (-laplacian + nu^2) with fixed ends, as a dense array."""
    n = params.n
    w2 = params.omega**2
    phi = np.zeros((n, n))
    np.fill_diagonal(phi, w2 * (2.0 + params.nu2))
    idx = np.arange(n - 1)
    phi[idx, idx + 1] = -w2
    phi[idx + 1, idx] = -w2
    return phi


def spectral_data(params: ChainParams) -> SpectralData:
    """Eigenbasis, eigenvalues and mode cosines of the force matrix."""
    n = params.n
    k = np.arange(1, n + 1)
    theta = np.pi * k / (n + 1)
    f = np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(k, k) * np.pi / (n + 1))
    mu = params.omega**2 * (params.nu2 + 4.0 * np.sin(theta / 2.0) ** 2)
    c = np.cos(theta)
    return SpectralData(f=f, mu=mu, c=c)


def build_drift(params: ChainParams, couplings: CouplingProfile) -> Array:
    """Drift matrix of the phase-space dynamics dX = -A X dt + noise.

    Block layout: [[0, -I], [Phi, diag(lambda_i)]].
    """
    n = params.n
    if couplings.n != n:
        raise ValueError(f"coupling profile has {couplings.n} sites, expected {n}")
    a = np.zeros((2 * n, 2 * n))
    a[:n, n:] = -np.eye(n)
    a[n:, :n] = build_phi(params)
    a[n:, n:] = np.diag(couplings.lambdas)
    return a


def build_noise(couplings: CouplingProfile, temps) -> Array:
    """Noise intensity matrix; only the momentum block 2*diag(lambda_i T_i) is nonzero.

    ``temps`` may be a TemperatureProfile or a plain array of length N.
    """
    t = np.asarray(getattr(temps, "temps", temps), dtype=float)
    if t.shape != (couplings.n,):
        raise ValueError("temperature and coupling lengths differ")
    if np.any(t < 0.0):
        raise ValueError("temperatures must be nonnegative")
    n = couplings.n
    sigma2 = np.zeros((2 * n, 2 * n))
    sigma2[n:, n:] = np.diag(2.0 * couplings.lambdas * t)
    return sigma2


def build_current_matrix_k(n: int) -> Array:
    """Bond-current coupling matrix K.

    Row 1 is e1 - e2, row N is e_{N-1} - e_N, and interior row i is
    e_{i-1} - e_{i+1}, so that p.K q = sum_i (q_i - q_{i+1})(p_i + p_{i+1}).
    """
    if n < 2:
        raise ValueError(f"current matrix needs at least 2 sites, got {n}")
    k = np.zeros((n, n))
    k[0, 0], k[0, 1] = 1.0, -1.0
    k[n - 1, n - 2], k[n - 1, n - 1] = 1.0, -1.0
    for i in range(1, n - 1):
        k[i, i - 1] = 1.0
        k[i, i + 1] = -1.0
    return k


def transverse_mode_shifts(n_transverse) -> Array:
    """Pinning shifts 2 sum_i (1 - cos(2 pi k_i / N'_i)) over all transverse wavevectors.

    Fourier transforming a periodic transverse direction of size N' turns the
    lattice into decoupled chains whose pinning ratio is nu^2 plus one of these
    shifts; the returned array enumerates all prod(N'_i) wavevectors.
    """
    sizes = [int(m) for m in np.atleast_1d(n_transverse)]
    if any(m < 1 for m in sizes):
        raise ValueError("transverse sizes must be >= 1")
    shift = np.zeros(1)
    for m in sizes:
        k = np.arange(m)
        axis = 2.0 * (1.0 - np.cos(2.0 * np.pi * k / m))
        shift = (shift[:, None] + axis[None, :]).ravel()
    return shift


def shifted_params(params: ChainParams, shift: float) -> ChainParams:
    """Chain parameters with the pinning ratio nu^2 increased by ``shift``."""
    gamma = math.sqrt(params.gamma**2 + shift * params.omega**2)
    return ChainParams(params.omega, gamma, params.lam, params.n)


def drift_mode_eigenvalues(params: ChainParams) -> NDArray[np.complex128]:
    """Eigenvalues lam/2 +/- sqrt(lam^2/4 - mu_k) of the uniformly damped drift."""
    mu = spectral_data(params).mu
    rho = np.sqrt((params.lam**2 / 4.0 - mu).astype(complex))
    return np.concatenate([params.lam / 2.0 + rho, params.lam / 2.0 - rho])


# Below this threshold on rho^2 t^2 the hyperbolic/trigonometric branch loses
# digits to cancellation and the Taylor series is exact to machine precision.
_SERIES_CUTOFF = 1e-8


def mode_propagator_entries(params: ChainParams, t: float):
    """Entries (a, b, c, d) of the per-mode 2x2 propagators exp(-t A_k).

    A_k = [[0, -1], [mu_k, lam]] acts on the k-th position/momentum mode pair;
    the closed form is exp(-t lam/2) [cosh(rho t) I + sinh(rho t)/rho * B_k]
    with rho^2 = lam^2/4 - mu_k.  The evaluation is overflow-safe for large t
    and switches to a series when rho is nearly degenerate.
    """
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    lam = params.lam
    mu = spectral_data(params).mu
    rho2 = lam**2 / 4.0 - mu
    y = rho2 * t * t

    cosh_term = np.empty_like(mu)
    sinhc_term = np.empty_like(mu)  # exp(-t lam/2) * sinh(rho t)/rho

    small = np.abs(y) < _SERIES_CUTOFF
    over = (~small) & (rho2 > 0.0)
    osc = (~small) & (rho2 < 0.0)

    if np.any(small):
        e = math.exp(-t * lam / 2.0)
        ys = y[small]
        cosh_term[small] = e * (1.0 + ys / 2.0 + ys**2 / 24.0 + ys**3 / 720.0)
        sinhc_term[small] = e * t * (1.0 + ys / 6.0 + ys**2 / 120.0 + ys**3 / 5040.0)
    if np.any(over):
        r = np.sqrt(rho2[over])
        # lam/2 - r = mu/(lam/2 + r) > 0, so both exponentials decay.
        ep = np.exp(-t * (lam / 2.0 - r))
        em = np.exp(-t * (lam / 2.0 + r))
        cosh_term[over] = 0.5 * (ep + em)
        sinhc_term[over] = (ep - em) / (2.0 * r)
    if np.any(osc):
        s = np.sqrt(-rho2[osc])
        e = math.exp(-t * lam / 2.0)
        cosh_term[osc] = e * np.cos(s * t)
        sinhc_term[osc] = e * np.sin(s * t) / s

    a = cosh_term + 0.5 * lam * sinhc_term
    b = sinhc_term
    c = -mu * sinhc_term
    d = cosh_term - 0.5 * lam * sinhc_term
    return a, b, c, d


def _max_2x2_norm(a, b, c, d) -> float:
    """Largest spectral norm among a family of 2x2 matrices [[a,b],[c,d]]."""
    frob2 = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = np.sqrt(np.maximum(frob2 * frob2 - 4.0 * det * det, 0.0))
    return float(np.sqrt(np.max((frob2 + disc) / 2.0)))


def propagator_norm(params: ChainParams, t: float) -> float:
    """Spectral norm of exp(-t A) for uniform couplings, from the mode closed form."""
    return _max_2x2_norm(*mode_propagator_entries(params, t))


def propagator_matrix(params: ChainParams, t: float) -> Array:
    """Dense exp(-t A) for uniform couplings, assembled in the spectral basis."""
    sd = spectral_data(params)
    a, b, c, d = mode_propagator_entries(params, t)
    f = sd.f
    n = params.n
    out = np.empty((2 * n, 2 * n))
    out[:n, :n] = (f * a) @ f.T
    out[:n, n:] = (f * b) @ f.T
    out[n:, :n] = (f * c) @ f.T
    out[n:, n:] = (f * d) @ f.T
    return out


def propagator_envelope(params: ChainParams, t) -> Array:
    """Decay envelope exp(-t alpha) * (1 + t (1 + gamma^2 + 4 omega^2 + lam/2))."""
    t = np.asarray(t, dtype=float)
    c_a = 1.0 + params.gamma**2 + 4.0 * params.omega**2 + params.lam / 2.0
    return np.exp(-t * params.alpha_lower) * (1.0 + t * c_a)


@dataclass
class PropagatorBoundRow:
    t: float
    norm: float
    envelope: float
    within_bound: bool


@dataclass
class PropagatorBoundReport:
    rows: list[PropagatorBoundRow] = field(default_factory=list)

    @property
    def all_within(self) -> bool:
        return all(r.within_bound for r in self.rows)


def propagator_bound_report(
    params: ChainParams, t_grid, couplings: CouplingProfile | None = None
) -> PropagatorBoundReport:
    """Tabulate |exp(-t A)| against its decay envelope on a time grid.

    The mode-by-mode closed form requires a uniform coupling; a non-uniform
    profile is rejected.
    """
    if couplings is not None and not couplings.is_uniform:
        raise ValueError("propagator bound requires uniform couplings")
    if params.lam <= 0.0:
        raise ValueError("propagator bound requires a positive coupling")
    report = PropagatorBoundReport()
    for t in np.asarray(t_grid, dtype=float):
        if t < 0.0:
            raise ValueError("t must be nonnegative")
        norm = propagator_norm(params, float(t))
        env = float(propagator_envelope(params, t))
        report.rows.append(
            PropagatorBoundRow(
                t=float(t),
                norm=norm,
                envelope=env,
                within_bound=norm <= env * (1.0 + 1e-12),
            )
        )
    return report
