"""Stochastic oracle: exact Gaussian propagation of the reservoir-coupled lattice.

The linear Langevin dynamics is sampled without discretization bias: over a
step h the state is multiplied by the exact propagator and receives a Gaussian
increment whose covariance solves the finite-horizon noise integral via a
Lyapunov-difference identity.  Stationary moments estimated from long
trajectories provide an independent statistical check of every analytic
covariance and current formula; a deterministic companion measures the
relaxation rate of the covariance towards its fixed point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .covariance import TemperatureProfile, lyapunov_dense
from .model import (
    Array,
    ChainParams,
    CouplingProfile,
    build_drift,
    build_noise,
    propagator_matrix,
)

N_BATCHES = 20


@dataclass
class SimulationConfig:
    """Sampling plan for the stochastic integrator.

    ``total_time`` is the post-burn-in sampling span; ``burn_in`` defaults to
    10 relaxation times 10/alpha when left unset.
    """

    seed: int
    step: float
    total_time: float
    burn_in: float | None = None
    trajectories: int = 1

    def __post_init__(self):
        if self.step <= 0.0 or self.total_time <= 0.0:
            raise ValueError("step and total_time must be positive")
        if self.burn_in is not None and self.burn_in < 0.0:
            raise ValueError("burn_in must be nonnegative")
        if self.trajectories < 1:
            raise ValueError("need at least one trajectory")

    def resolve_burn_in(self, params: ChainParams) -> float:
        return self.burn_in if self.burn_in is not None else 10.0 / params.alpha_lower


@dataclass
class EstimatedMoments:
    """Time-averaged moments with batch-means error bars."""

    mean: Array
    mean_stderr: Array
    cov: Array
    cov_stderr: Array
    current_estimates: Array
    current_stderr: Array
    effective_samples: int
    n_samples: int


def _psd_factor(q: Array) -> Array:
    """Factor G with G G^T = q for a (numerically) positive semidefinite q."""
    q = (q + q.T) / 2.0
    try:
        return np.linalg.cholesky(q)
    except np.linalg.LinAlgError:
        # Retry once after re-symmetrization via the eigendecomposition; the
        # increment covariance is PSD analytically, so only roundoff can land here.
        w, vecs = np.linalg.eigh((q + q.T) / 2.0)
        floor = -1e-10 * max(1.0, float(np.max(np.abs(w))))
        if float(np.min(w)) < floor:
            raise RuntimeError(
                f"increment covariance has eigenvalue {np.min(w):.3e}; not PSD"
            )
        return vecs * np.sqrt(np.clip(w, 0.0, None))


def step_matrices(
    params: ChainParams,
    couplings: CouplingProfile,
    temps: TemperatureProfile,
    h: float,
):
    """Exact one-step propagator and increment factor (E_h, G) for step size h.

    E_h = exp(-hA); G G^T equals the noise integral over one step, obtained as
    S - E_h S E_h^T from the stationary covariance S.
    """
    if h <= 0.0:
        raise ValueError("step must be positive")
    couplings.require_dissipative()
    a = build_drift(params, couplings)
    if couplings.is_uniform and couplings.lambdas[0] == params.lam:
        e_h = propagator_matrix(params, h)
    else:
        e_h = scipy.linalg.expm(-h * a)
    sigma2 = build_noise(couplings, temps)
    if np.all(sigma2 == 0.0):
        return e_h, np.zeros_like(a)
    s = lyapunov_dense(a, sigma2)
    q_h = s - e_h @ s @ e_h.T
    return e_h, _psd_factor(q_h)


def exact_step(
    state: Array,
    h: float,
    params: ChainParams,
    couplings: CouplingProfile,
    temps: TemperatureProfile,
    rng: np.random.Generator,
) -> Array:
    """Advance the phase-space state by h with the exact transition kernel.

    Convenience wrapper that rebuilds the step matrices; loops should build
    them once with :func:`step_matrices`.
    """
    state = np.asarray(state, dtype=float)
    e_h, g = step_matrices(params, couplings, temps, h)
    if state.shape != (e_h.shape[0],):
        raise ValueError("state has wrong dimension")
    return e_h @ state + g @ rng.standard_normal(state.size)


def trajectory_rng(seed: int, trajectory: int) -> np.random.Generator:
    """Counter-based generator for one trajectory substream."""
    key = np.array([np.uint64(seed & (2**64 - 1)), np.uint64(trajectory)])
    return np.random.Generator(np.random.Philox(key=key))


def _current_samples(params: ChainParams, states: Array) -> Array:
    """Bond-current samples -(omega^2/2)(q_{i+1}-q_i)(p_i+p_{i+1}) per state row."""
    n = params.n
    q, p = states[:, :n], states[:, n:]
    return -params.omega**2 / 2.0 * (q[:, 1:] - q[:, :-1]) * (p[:, :-1] + p[:, 1:])


def estimate_stationary(
    config: SimulationConfig,
    params: ChainParams,
    couplings: CouplingProfile,
    temps: TemperatureProfile,
) -> EstimatedMoments:
    """Estimate stationary moments by time averaging after burn-in.

    Standard errors come from batch means over 20 contiguous batches per
    trajectory; the effective sample count compares the naive and batch-means
    variances of the second moments.
    """
    burn = config.resolve_burn_in(params)
    n_burn = int(math.ceil(burn / config.step))
    n_keep = int(config.total_time / config.step)
    if n_keep < N_BATCHES:
        raise ValueError("total_time too short for batch statistics")
    e_h, g = step_matrices(params, couplings, temps, config.step)
    dim = e_h.shape[0]
    n = params.n

    batch_mean_x = []
    batch_mean_xx = []
    batch_mean_j = []
    naive_var_xx_acc = np.zeros((dim, dim))
    total = 0

    for traj in range(config.trajectories):
        rng = trajectory_rng(config.seed, traj)
        x = np.zeros(dim)
        for _ in range(n_burn):
            x = e_h @ x + g @ rng.standard_normal(dim)
        states = np.empty((n_keep, dim))
        for step_i in range(n_keep):
            x = e_h @ x + g @ rng.standard_normal(dim)
            states[step_i] = x
        currents = _current_samples(params, states) if n >= 2 else np.zeros((n_keep, 0))
        edges = np.linspace(0, n_keep, N_BATCHES + 1, dtype=int)
        for b in range(N_BATCHES):
            chunk = states[edges[b] : edges[b + 1]]
            batch_mean_x.append(chunk.mean(axis=0))
            batch_mean_xx.append(chunk.T @ chunk / chunk.shape[0])
            batch_mean_j.append(currents[edges[b] : edges[b + 1]].mean(axis=0))
        mean_xx = states.T @ states / n_keep
        naive_var_xx_acc += np.einsum("ti,tj->ij", states**2, states**2) / n_keep - mean_xx**2
        total += n_keep

    bx = np.array(batch_mean_x)
    bxx = np.array(batch_mean_xx)
    bj = np.array(batch_mean_j)
    n_b = bx.shape[0]

    mean = bx.mean(axis=0)
    mean_stderr = bx.std(axis=0, ddof=1) / math.sqrt(n_b)
    second = bxx.mean(axis=0)
    cov_stderr = bxx.std(axis=0, ddof=1) / math.sqrt(n_b)
    cov = second - np.outer(mean, mean)
    current = bj.mean(axis=0)
    current_stderr = (
        bj.std(axis=0, ddof=1) / math.sqrt(n_b) if bj.size else np.zeros(0)
    )

    # Batch-means ESS: per diagonal second moment, the iid sample variance over
    # the variance of batch means, times the number of batches.
    diag = np.arange(dim)
    naive_var = (naive_var_xx_acc / config.trajectories)[diag, diag]
    batch_var = bxx.var(axis=0, ddof=1)[diag, diag]
    ok = (batch_var > 0) & np.isfinite(naive_var) & (naive_var > 0)
    eff = (
        max(1, int(float(np.median(naive_var[ok] / batch_var[ok])) * n_b))
        if np.any(ok)
        else total
    )
    return EstimatedMoments(
        mean=mean,
        mean_stderr=mean_stderr,
        cov=cov,
        cov_stderr=cov_stderr,
        current_estimates=current,
        current_stderr=current_stderr,
        effective_samples=eff,
        n_samples=total,
    )


def covariance_gap(
    params: ChainParams,
    couplings: CouplingProfile,
    temps: TemperatureProfile,
    t: float,
) -> float:
    """Deterministic distance |C(t,t) - S| of the cold-start covariance from its limit.

    From C_0 = 0 the finite-time covariance is S - exp(-tA) S exp(-tA)^T, so
    the gap equals |exp(-tA) S exp(-tA)^T|.
    """
    a = build_drift(params, couplings)
    sigma2 = build_noise(couplings, temps)
    s = lyapunov_dense(a, sigma2)
    if couplings.is_uniform and couplings.lambdas[0] == params.lam:
        e_t = propagator_matrix(params, t)
    else:
        e_t = scipy.linalg.expm(-t * a)
    return float(np.linalg.norm(e_t @ s @ e_t.T, 2))


def convergence_rate(
    config: SimulationConfig,
    params: ChainParams,
    couplings: CouplingProfile,
    temps: TemperatureProfile,
) -> float:
    """Fitted exponential rate of covariance relaxation from a cold start.

    Deterministic (no sampling): fits log |C(t,t) - S| on a grid inside the
    exponential regime; uniform couplings only, where the mode closed form
    provides the propagator.
    """
    if not couplings.is_uniform:
        raise ValueError("rate fit requires uniform couplings")
    alpha = params.alpha_lower
    t_grid = np.linspace(0.5 / alpha, 8.0 / alpha, 24)
    gaps = np.array([covariance_gap(params, couplings, temps, t) for t in t_grid])
    if np.any(gaps <= 0.0):
        raise RuntimeError("covariance gap vanished; nothing to fit")
    slope, _ = np.polyfit(t_grid, np.log(gaps), 1)
    return float(-slope)
