"""Stationary covariance of the reservoir-coupled chain by three independent routes.

Routes implemented:

* closed-form spectral sums in the sine eigenbasis (production path),
* a generic dense Lyapunov solve (oracle path),
* the general-noise spectral solution with an arbitrary symmetric noise
  cross-block, which reduces to the closed form for diagonal noise.

The module also computes the folded Fourier coefficients of the spectral
kernels, from which exponential decay of correlations and local-equilibrium
deviations are quantified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import (
    Array,
    ChainParams,
    CouplingProfile,
    build_drift,
    build_noise,
    build_phi,
    spectral_data,
)

BLOCKS = ("U", "V", "Z")

# Stability margin below which a drift eigenvalue counts as unstable.
STABILITY_TOL = 1e-12


class UnstableDriftError(ValueError):
    """Raised when a Lyapunov solve is requested for a non-dissipative drift."""


class CoefficientResolutionError(RuntimeError):
    """Raised when the folded-coefficient grid cannot reach its target residual."""

    def __init__(self, residual: float, target: float):
        self.residual = residual
        self.target = target
        super().__init__(
            f"folded-coefficient reconstruction residual {residual:.3e} "
            f"exceeds target {target:.3e} at maximum grid resolution"
        )


@dataclass
class TemperatureProfile:
    """Per-site reservoir temperatures with the end values kept explicitly."""

    temps: Array
    t_left: float
    t_right: float

    def __post_init__(self):
        self.temps = np.asarray(self.temps, dtype=float)
        if self.temps.ndim != 1 or self.temps.size < 1:
            raise ValueError("temps must be a nonempty 1-d sequence")
        if np.any(self.temps < 0.0):
            raise ValueError("temperatures must be nonnegative")
        if not (
            math.isclose(self.temps[0], self.t_left, rel_tol=0.0, abs_tol=1e-13)
            and math.isclose(self.temps[-1], self.t_right, rel_tol=0.0, abs_tol=1e-13)
        ):
            raise ValueError("end entries must equal t_left and t_right")

    @classmethod
    def from_values(cls, temps) -> "TemperatureProfile":
        t = np.asarray(temps, dtype=float)
        return cls(t, float(t[0]), float(t[-1]))

    @classmethod
    def uniform(cls, t: float, n: int) -> "TemperatureProfile":
        return cls(np.full(n, float(t)), float(t), float(t))

    @classmethod
    def linear(cls, t_left: float, t_right: float, n: int) -> "TemperatureProfile":
        if n == 1:
            return cls(np.array([float(t_left)]), float(t_left), float(t_left))
        return cls(np.linspace(t_left, t_right, n), float(t_left), float(t_right))

    @property
    def n(self) -> int:
        return self.temps.size

    def max_jump(self) -> float:
        """Largest nearest-neighbour temperature difference."""
        if self.n < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.temps))))


@dataclass
class CovarianceBlocks:
    """Blocks of the stationary covariance: position u, momentum v, cross z."""

    u: Array
    v: Array
    z: Array

    @property
    def n(self) -> int:
        return self.u.shape[0]

    def full(self) -> Array:
        """Assemble the full 2N x 2N covariance [[U, Z], [Z^T, V]]."""
        return np.block([[self.u, self.z], [self.z.T, self.v]])

    def kinetic_temperatures(self) -> Array:
        return np.diag(self.v).copy()

    @classmethod
    def from_full(cls, s: Array) -> "CovarianceBlocks":
        n = s.shape[0] // 2
        return cls(u=s[:n, :n].copy(), v=s[n:, n:].copy(), z=s[:n, n:].copy())


def g_function(x, y, params: ChainParams):
    """Denominator kernel (x-y)^2 + (lam^2/omega^2)(nu^2 + 2 - x - y) on [-1,1]^2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(x) > 1.0) or np.any(np.abs(y) > 1.0):
        raise ValueError("g_function arguments must lie in [-1, 1]")
    val = (x - y) ** 2 + (params.lam**2 / params.omega**2) * (params.nu2 + 2.0 - x - y)
    return val if val.ndim else float(val)


def f_block(block: str, x, y, params: ChainParams):
    """Spectral kernel of a covariance block, evaluated at cosine pairs.

    block "U": (lam^2/omega^4) / G;  "V": 1 - (x-y)^2 / G;
    "Z": (lam/omega^2) (y-x) / G.
    """
    if block not in BLOCKS:
        raise ValueError(f"unknown block {block!r}, expected one of {BLOCKS}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    g = g_function(x, y, params)
    if block == "U":
        val = (params.lam**2 / params.omega**4) / g
    elif block == "V":
        val = 1.0 - (x - y) ** 2 / g
    else:
        val = (params.lam / params.omega**2) * (y - x) / g
    val = np.asarray(val)
    return val if val.ndim else float(val)


def _kernel_grid(block: str, params: ChainParams, c: Array) -> Array:
    return np.asarray(f_block(block, c[:, None], c[None, :], params))


def lyapunov_residual(a: Array, s: Array, sigma2: Array) -> float:
    """Spectral norm of a s + s a^T - sigma2."""
    return float(np.linalg.norm(a @ s + s @ a.T - sigma2, 2))


def _validate_blocks(
    blocks: CovarianceBlocks, a: Array, sigma2: Array, rel_tol: float = 1e-8
) -> CovarianceBlocks:
    """Check symmetry, antisymmetry and the Lyapunov residual of a solution."""
    n = blocks.n
    sym_err = max(
        float(np.max(np.abs(blocks.u - blocks.u.T))),
        float(np.max(np.abs(blocks.v - blocks.v.T))),
    )
    asym_err = float(np.max(np.abs(blocks.z + blocks.z.T)))
    if sym_err > 1e-10 or asym_err > 1e-10:
        raise RuntimeError(
            f"covariance block symmetry violated: sym {sym_err:.2e}, antisym {asym_err:.2e}"
        )
    scale = max(float(np.linalg.norm(sigma2, 2)), 1e-300)
    res = lyapunov_residual(a, blocks.full(), sigma2)
    if res > rel_tol * scale:
        raise RuntimeError(
            f"stationarity residual {res:.2e} exceeds {rel_tol:.0e} * |noise| = "
            f"{rel_tol * scale:.2e} for n = {n}"
        )
    return blocks


def covariance_closed_form(
    params: ChainParams, temps: TemperatureProfile, validate: bool = True
) -> CovarianceBlocks:
    """Stationary covariance from the spectral closed form (uniform couplings).

    Each block is F (f_block(c_k, c_l) * T~_kl) F^T where T~ is the rotated
    diagonal temperature matrix.  Requires a positive uniform coupling, since
    lam = 0 leaves the stationary state undetermined.
    """
    if params.lam <= 0.0:
        raise ValueError("closed-form covariance requires a positive uniform coupling")
    if temps.n != params.n:
        raise ValueError("temperature profile length differs from chain length")
    sd = spectral_data(params)
    f = sd.f
    d_tilde = f.T @ (temps.temps[:, None] * f)
    u = f @ (_kernel_grid("U", params, sd.c) * d_tilde) @ f.T
    v = f @ (_kernel_grid("V", params, sd.c) * d_tilde) @ f.T
    z = f @ (_kernel_grid("Z", params, sd.c) * d_tilde) @ f.T
    blocks = CovarianceBlocks(
        u=(u + u.T) / 2.0, v=(v + v.T) / 2.0, z=(z - z.T) / 2.0
    )
    if validate:
        couplings = CouplingProfile.uniform(params.lam, params.n)
        a = build_drift(params, couplings)
        sigma2 = build_noise(couplings, temps)
        _validate_blocks(blocks, a, sigma2)
    return blocks


def equilibrium_covariance(params: ChainParams, t: float) -> CovarianceBlocks:
    """Gibbs covariance at uniform temperature t: U = t Phi^-1, V = t I, Z = 0."""
    if t < 0.0:
        raise ValueError("temperature must be nonnegative")
    n = params.n
    phi_inv = np.linalg.inv(build_phi(params))
    return CovarianceBlocks(
        u=t * (phi_inv + phi_inv.T) / 2.0, v=t * np.eye(n), z=np.zeros((n, n))
    )


def lyapunov_dense(a: Array, sigma2: Array) -> Array:
    """Solve a S + S a^T = sigma2 for the stationary covariance of dX = -aX dt + noise.

    The drift must have all eigenvalues strictly in the right half plane;
    otherwise no stationary state exists and UnstableDriftError is raised.
    The dense Bartels-Stewart factorization from scipy is used; on return the
    residual is checked against 1e-9 (|a||S| + |sigma2|).
    """
    a = np.asarray(a, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    if a.shape != sigma2.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("drift and noise must be square matrices of equal size")
    eigs = np.linalg.eigvals(a)
    min_real = float(np.min(eigs.real))
    if min_real <= STABILITY_TOL:
        raise UnstableDriftError(
            f"drift has an eigenvalue with real part {min_real:.3e} <= {STABILITY_TOL}"
        )
    s = scipy.linalg.solve_continuous_lyapunov(a, sigma2)
    s = (s + s.T) / 2.0
    res = lyapunov_residual(a, s, sigma2)
    bound = 1e-9 * (
        np.linalg.norm(a, 2) * np.linalg.norm(s, 2) + np.linalg.norm(sigma2, 2)
    )
    if res > max(bound, 1e-300):
        raise RuntimeError(f"Lyapunov residual {res:.3e} exceeds tolerance {bound:.3e}")
    return s


def lyapunov_dense_blocks(
    params: ChainParams, couplings: CouplingProfile, temps: TemperatureProfile
) -> CovarianceBlocks:
    """Stationary covariance blocks for an arbitrary coupling profile (dense route)."""
    couplings.require_dissipative()
    a = build_drift(params, couplings)
    sigma2 = build_noise(couplings, temps)
    s = lyapunov_dense(a, sigma2)
    return CovarianceBlocks.from_full(s)


def lyapunov_spectral_general(
    params: ChainParams, b: Array, d: Array, validate: bool = True
) -> CovarianceBlocks:
    """Stationary covariance for general noise [[0, b], [b^T, 2*lam*d]], uniform coupling.

    Implements the rotated-basis solution

        U~_kl = (2/g_kl) [2 lam^2 (d~ + b~_sym)_kl - (mu_k - mu_l) b~_skew_kl]
        V~_kl = (1/g_kl) [2 lam^2 (mu_k + mu_l) d~_kl
                          - (mu_k - mu_l)(mu_k b~_kl - mu_l b~_lk)]
        Z~_kl = (2 lam/g_kl) [(mu_k - mu_l) d~_kl + mu_k b~_kl - mu_l b~_lk]

    with g_kl = 4 omega^4 G(c_k, c_l).  For b = 0 and d = diag(T) this is the
    closed-form covariance.
    """
    if params.lam <= 0.0:
        raise ValueError("spectral solution requires a positive uniform coupling")
    n = params.n
    b = np.asarray(b, dtype=float)
    d = np.asarray(d, dtype=float)
    if b.shape != (n, n) or d.shape != (n, n):
        raise ValueError("b and d must be N x N")
    if np.max(np.abs(d - d.T)) > 1e-12 * max(1.0, np.max(np.abs(d))):
        raise ValueError("d must be symmetric")
    sd = spectral_data(params)
    f, mu = sd.f, sd.mu
    lam = params.lam

    b_t = f.T @ b @ f
    d_t = f.T @ d @ f
    b_sym = (b_t + b_t.T) / 2.0
    b_skew = (b_t - b_t.T) / 2.0
    dmu = mu[:, None] - mu[None, :]
    smu = mu[:, None] + mu[None, :]
    g = 4.0 * params.omega**4 * np.asarray(
        g_function(sd.c[:, None], sd.c[None, :], params)
    )
    cross = mu[:, None] * b_t - b_t.T * mu[None, :]

    u_t = (2.0 / g) * (2.0 * lam**2 * (d_t + b_sym) - dmu * b_skew)
    v_t = (1.0 / g) * (2.0 * lam**2 * smu * d_t - dmu * cross)
    z_t = (2.0 * lam / g) * (dmu * d_t + cross)

    u = f @ u_t @ f.T
    v = f @ v_t @ f.T
    z = f @ z_t @ f.T
    blocks = CovarianceBlocks(
        u=(u + u.T) / 2.0, v=(v + v.T) / 2.0, z=(z - z.T) / 2.0
    )
    if validate:
        couplings = CouplingProfile.uniform(lam, n)
        a = build_drift(params, couplings)
        sigma2 = np.zeros((2 * n, 2 * n))
        sigma2[:n, n:] = b
        sigma2[n:, :n] = b.T
        sigma2[n:, n:] = 2.0 * lam * d
        _validate_blocks(blocks, a, sigma2, rel_tol=1e-9)
    return blocks


def coefficient_tensor(block: str, params: ChainParams) -> Array:
    """Temperature-response coefficients B^(r)_ij as an (r, i, j) array.

    Computed directly from the spectral double sum; intended for moderate N.
    """
    sd = spectral_data(params)
    f = sd.f
    kern = _kernel_grid(block, params, sd.c)
    n = params.n
    out = np.empty((n, n, n))
    for r in range(n):
        w = np.outer(f[r], f[r])
        out[r] = f @ (kern * w) @ f.T
    return out


@dataclass
class FoldedCoefficients:
    """Periodically folded Fourier coefficients of a block kernel.

    ``grid[m % period, n % period]`` holds the folded coefficient for integer
    offsets (m, n); the fundamental window is {-N, ..., N+1} in each index.
    """

    block: str
    n: int
    grid: Array
    residual: float
    fft_exponent: int

    @property
    def period(self) -> int:
        return 2 * (self.n + 1)

    def lookup(self, m, n) -> Array:
        m = np.mod(np.asarray(m), self.period)
        n = np.mod(np.asarray(n), self.period)
        return self.grid[m, n]

    def window_values(self):
        """Folded coefficients over the fundamental window with |m'|+|n'| labels."""
        p = self.period
        idx = np.arange(p)
        signed = np.where(idx <= self.n + 1, idx, idx - p)
        dist = np.abs(signed)[:, None] + np.abs(signed)[None, :]
        return self.grid, dist

    def reconstruct(self, i, j, r) -> Array:
        """Coefficient B^(r)_ij from the four-term folded representation.

        Site indices are 1-based, matching the lattice convention.
        """
        i = np.asarray(i)
        j = np.asarray(j)
        r = np.asarray(r)
        return (
            self.lookup(i - r, j - r)
            + self.lookup(i + r, j + r)
            - self.lookup(i - r, j + r)
            - self.lookup(i + r, j - r)
        )


def _fft_coefficients(block: str, params: ChainParams, p: int) -> Array:
    """Fourier coefficients of f_block(cos x, cos y) on a 2^p uniform angle grid."""
    m = 2**p
    x = 2.0 * np.pi * np.arange(m) / m
    cx = np.cos(x)
    vals = np.asarray(f_block(block, cx[:, None], cx[None, :], params))
    return np.fft.fft2(vals).real / m**2


_FOLD_RANGE = 3  # folding images per axis; tail monitored via the residual


def folded_coefficients(
    block: str,
    params: ChainParams,
    n: int | None = None,
    target_residual: float = 1e-8,
) -> FoldedCoefficients:
    """Folded coefficient grid for a block kernel at chain length n.

    The kernel is analytic on the closed square because the pinning keeps its
    denominator positive, so plain-grid FFT coefficients converge
    geometrically; the grid exponent starts at 8 and doubles (capped at 12)
    until reconstructed coefficients match the direct spectral sum to
    ``target_residual``.
    """
    if n is None:
        n = params.n
    chain = params if params.n == n else ChainParams(params.omega, params.gamma, params.lam, n)
    period = 2 * (n + 1)

    probes = _reconstruction_probes(chain)
    best: FoldedCoefficients | None = None
    p = 8
    while True:
        coeffs = _fft_coefficients(block, chain, p)
        m = coeffs.shape[0]
        half = m // 2
        grid = np.zeros((period, period))
        idx = np.arange(period)
        signed = np.where(idx <= n + 1, idx, idx - period)
        for km in range(-_FOLD_RANGE, _FOLD_RANGE + 1):
            mm = signed + period * km
            ok_m = np.abs(mm) <= half - 1
            for kn in range(-_FOLD_RANGE, _FOLD_RANGE + 1):
                nn = signed + period * kn
                ok_n = np.abs(nn) <= half - 1
                sel = np.outer(ok_m, ok_n)
                rows = np.mod(mm, m)[:, None]
                cols = np.mod(nn, m)[None, :]
                grid += np.where(sel, coeffs[rows, cols], 0.0)
        fc = FoldedCoefficients(block=block, n=n, grid=grid, residual=np.inf, fft_exponent=p)
        fc.residual = _reconstruction_residual(fc, block, chain, probes)
        if best is None or fc.residual < best.residual:
            best = fc
        if fc.residual <= target_residual:
            return fc
        if p >= 12:
            raise CoefficientResolutionError(best.residual, target_residual)
        p += 1


def _reconstruction_probes(params: ChainParams):
    """A deterministic set of (i, j, r) triples probing the reconstruction."""
    n = params.n
    rng = np.random.default_rng(181)
    probes = {(1, 1, 1), (1, n, 1), (n, n, n), (max(1, n // 2), max(1, n // 2), 1)}
    while len(probes) < min(12, n * n):
        i, j, r = rng.integers(1, n + 1, size=3)
        probes.add((int(i), int(j), int(r)))
    return sorted(probes)


def _reconstruction_residual(
    fc: FoldedCoefficients, block: str, params: ChainParams, probes
) -> float:
    sd = spectral_data(params)
    f = sd.f
    kern = _kernel_grid(block, params, sd.c)
    worst = 0.0
    for i, j, r in probes:
        direct = float((f[i - 1] * f[r - 1]) @ kern @ (f[j - 1] * f[r - 1]))
        folded = float(fc.reconstruct(i, j, r))
        worst = max(worst, abs(direct - folded))
    return worst


@dataclass
class DecayEstimate:
    """Fitted exponential decay of folded coefficients for one block."""

    a: float
    alpha: float
    a_prime: float
    block_id: str


def decay_estimate(block: str, params: ChainParams, n: int | None = None) -> DecayEstimate:
    """Fit |f^_N(m,n)| <= a exp(-alpha(|m'|+|n'|)) and bound the response-row sums.

    alpha comes from least squares on the log magnitudes (entries below 1e-14
    and exact symmetry zeros are discarded); a is then inflated so the bound
    holds on the whole computed grid.  a_prime is max_ij sum_r |i-r||B^(r)_ij|
    evaluated from the exact spectral coefficients.
    """
    if n is None:
        n = params.n
    chain = params if params.n == n else ChainParams(params.omega, params.gamma, params.lam, n)
    fc = folded_coefficients(block, chain)
    grid, dist = fc.window_values()
    mags = np.abs(grid)
    mask = mags > 1e-14
    if np.count_nonzero(mask) < 8:
        raise RuntimeError("too few significant coefficients to fit a decay rate")
    x = dist[mask].astype(float)
    y = np.log(mags[mask])
    slope, intercept = np.polyfit(x, y, 1)
    alpha = float(-slope)
    a = float(np.max(mags * np.exp(alpha * dist)))

    tensor = coefficient_tensor(block, chain)
    sites = np.arange(1, n + 1)
    weights = np.abs(sites[:, None] - sites[None, :]).astype(float)  # (i, r)
    weighted = np.einsum("ir,rij->ij", weights, np.abs(tensor))
    a_prime = float(np.max(weighted))
    return DecayEstimate(a=a, alpha=alpha, a_prime=a_prime, block_id=block)


def local_equilibrium_deviation(
    s: CovarianceBlocks, temps: TemperatureProfile, params: ChainParams
):
    """Largest deviation of the covariance from the local Gibbs form, and the profile jump.

    Returns (max over blocks and entries of |B_ij - T_i B^(eq,1)_ij|, eps_N)
    where B^(eq,1) is the equilibrium covariance at unit temperature and
    eps_N the maximum nearest-neighbour temperature difference.
    """
    if s.n != temps.n or s.n != params.n:
        raise ValueError("inconsistent sizes")
    eq = equilibrium_covariance(params, 1.0)
    t_col = temps.temps[:, None]
    dev = max(
        float(np.max(np.abs(s.u - t_col * eq.u))),
        float(np.max(np.abs(s.v - t_col * eq.v))),
        float(np.max(np.abs(s.z))),
    )
    return dev, temps.max_jump()
