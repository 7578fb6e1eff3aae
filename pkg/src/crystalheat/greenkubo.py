"""Equilibrium current autocorrelation and the Green-Kubo conductivity.

The total-current autocorrelation of the equilibrium chain reduces to a trace
over the propagator and a temperature-free weight matrix, so the Green-Kubo
conductivity can be computed three independent ways: by time quadrature of the
correlation function, from an auxiliary Lyapunov solution with a cross-block
noise, and from an explicit spectral double sum.  All three converge to the
bulk conductivity as the chain grows.  No route takes a temperature argument:
the normalized correlation is structurally temperature independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg

from .covariance import g_function, lyapunov_spectral_general
from .model import (
    Array,
    ChainParams,
    CouplingProfile,
    build_current_matrix_k,
    build_drift,
    build_phi,
    mode_propagator_entries,
    propagator_envelope,
    spectral_data,
)
from .transport import kappa_closed_form, richardson_extrapolate


def _require_dissipative(params: ChainParams):
    if params.lam <= 0.0:
        raise ValueError("Green-Kubo routes require a positive uniform coupling")
    if params.n < 2:
        raise ValueError("Green-Kubo routes need at least 2 sites")


def correlation_g(params: ChainParams, t: float) -> float:
    """Normalized total-current autocorrelation g_N(t) at lag t >= 0.

    Evaluates Tr[KK exp(-tA) E KK E exp(-tA^T)] / (2(N+1)) in the spectral
    basis, with E the unit-temperature equilibrium covariance and KK the
    phase-space extension of the bond-current matrix.  The correlation is even
    in t; only t >= 0 is represented.
    """
    _require_dissipative(params)
    if t < 0.0:
        raise ValueError("t must be nonnegative; g is even in t")
    n = params.n
    sd = spectral_data(params)
    k_t = sd.f.T @ build_current_matrix_k(n) @ sd.f
    a, b, c, d = mode_propagator_entries(params, t)
    inv_mu = 1.0 / sd.mu
    ky = k_t * inv_mu[None, :]  # K~ Y^-1
    yk = inv_mu[:, None] * k_t.T  # Y^-1 K~^T
    w21 = d[:, None] * ky * a[None, :] + c[:, None] * yk * b[None, :]
    w12 = b[:, None] * ky * c[None, :] + a[:, None] * yk * d[None, :]
    trace = float(np.sum(k_t * w21) + np.sum(k_t * w12.T))
    return trace / (2.0 * (n + 1))


def correlation_g_dense(params: ChainParams, t: float) -> float:
    """Dense-basis evaluation of g_N(t) with a scaling-and-squaring exponential.

    Cross-check oracle for :func:`correlation_g`; O((2N)^3) per call.
    """
    _require_dissipative(params)
    n = params.n
    k = build_current_matrix_k(n)
    kk = np.zeros((2 * n, 2 * n))
    kk[:n, n:] = k.T
    kk[n:, :n] = k
    e = np.zeros((2 * n, 2 * n))
    e[:n, :n] = np.linalg.inv(build_phi(params))
    e[n:, n:] = np.eye(n)
    a = build_drift(params, CouplingProfile.uniform(params.lam, n))
    prop = scipy.linalg.expm(-t * a)
    return float(np.trace(kk @ prop @ e @ kk @ e @ prop.T)) / (2.0 * (n + 1))


def correlation_envelope(params: ChainParams, t) -> Array:
    """Upper bound on |g_N(t)| from the propagator decay envelope."""
    n = params.n
    k_norm = float(np.linalg.norm(build_current_matrix_k(n), 2))
    mu_min = spectral_data(params).mu[0]
    e_norm = max(1.0, 1.0 / mu_min)
    pref = 2.0 * n / (2.0 * (n + 1)) * k_norm**2 * e_norm**2
    return pref * propagator_envelope(params, t) ** 2


def ktilde_minus_explicit(n: int) -> Array:
    """Antisymmetric part of the rotated current matrix, odd-offset closed form."""
    k = np.arange(1, n + 1)
    diff = k[:, None] - k[None, :]
    odd = (np.abs(diff) % 2) == 1
    out = np.zeros((n, n))
    if np.any(odd):
        s = np.pi / (n + 1)
        num = np.sin(s * k)[:, None] * np.sin(s * k)[None, :]
        denom_d = np.sin(s * diff / 2.0)
        denom_s = np.sin(s * (k[:, None] + k[None, :]) / 2.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = -2.0 / (n + 1) * num / (denom_d * denom_s)
        out[odd] = vals[odd]
    return out


def ktilde_minus(params: ChainParams, check_tol: float = 1e-10) -> Array:
    """Rotated antisymmetric current matrix, cross-checked against the closed form."""
    sd = spectral_data(params)
    k_t = sd.f.T @ build_current_matrix_k(params.n) @ sd.f
    skew = (k_t - k_t.T) / 2.0
    explicit = ktilde_minus_explicit(params.n)
    err = float(np.max(np.abs(skew - explicit)))
    if err > check_tol:
        raise RuntimeError(
            f"explicit rotated current matrix deviates by {err:.2e} from F^T K F"
        )
    return explicit


def auxiliary_covariance(params: ChainParams):
    """Solution S' of A S' + S'^T drift equation with noise blocks b = Phi^-1 K^T, d = 0."""
    _require_dissipative(params)
    b = np.linalg.inv(build_phi(params)) @ build_current_matrix_k(params.n).T
    d = np.zeros((params.n, params.n))
    return lyapunov_spectral_general(params, b, d)


def kappa_gk_lyapunov(params: ChainParams) -> float:
    """Green-Kubo conductivity at size N from the auxiliary Lyapunov solution.

    Returns (omega^4 / 8) Tr[KK S'] / (N+1) with Tr[KK S'] = 2 Tr[K Z'].
    """
    blocks = auxiliary_covariance(params)
    k = build_current_matrix_k(params.n)
    trace = 2.0 * float(np.trace(k @ blocks.z))
    return params.omega**4 / 8.0 * trace / (params.n + 1)


def kappa_gk_spectral(params: ChainParams) -> float:
    """Green-Kubo conductivity at size N from the explicit spectral double sum."""
    _require_dissipative(params)
    sd = spectral_data(params)
    km = ktilde_minus(params)
    g = np.asarray(g_function(sd.c[:, None], sd.c[None, :], params))
    total = float(np.sum(km**2 / g))
    return params.lam / (4.0 * (params.n + 1)) * total


def quadrature_tail_bound(params: ChainParams, t_max: float) -> float:
    """Analytic bound on the neglected tail of the correlation time integral."""
    alpha = params.alpha_lower
    c_a = 1.0 + params.gamma**2 + 4.0 * params.omega**2 + params.lam / 2.0
    pref = float(correlation_envelope(params, 0.0))
    # Integral of exp(-2 alpha t)(1 + c t)^2 from t_max to infinity.
    two_a = 2.0 * alpha
    tail = math.exp(-two_a * t_max) * (
        (1.0 + c_a * t_max) ** 2 / two_a
        + 2.0 * c_a * (1.0 + c_a * t_max) / two_a**2
        + 2.0 * c_a**2 / two_a**3
    )
    return params.omega**4 / 4.0 * pref * tail


def kappa_gk_quadrature(params: ChainParams, epsabs: float = 1e-10):
    """Green-Kubo conductivity by adaptive time quadrature of the correlation.

    Integrates (omega^4/4) g_N over [0, 40/alpha]; the exponential envelope
    makes the neglected tail negligible and its analytic bound is returned
    alongside the value.
    """
    _require_dissipative(params)
    t_max = 40.0 / params.alpha_lower
    val, quad_err = scipy.integrate.quad(
        lambda t: correlation_g(params, t),
        0.0,
        t_max,
        epsabs=epsabs,
        epsrel=1e-10,
        limit=400,
    )
    kappa = params.omega**4 / 4.0 * val
    return kappa, quadrature_tail_bound(params, t_max) + params.omega**4 / 4.0 * quad_err


@dataclass
class GreenKuboReport:
    """Green-Kubo conductivity by three routes at one size, plus extrapolation."""

    n: int
    kappa_gk_lyapunov: float
    kappa_gk_spectral: float
    kappa_gk_quadrature: float
    kappa_target: float
    g_samples: list[tuple[float, float]] = field(default_factory=list)
    kappa_extrapolated: float | None = None
    quadrature_error_bound: float = 0.0

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "kappa_gk_lyapunov": self.kappa_gk_lyapunov,
            "kappa_gk_spectral": self.kappa_gk_spectral,
            "kappa_gk_quadrature": self.kappa_gk_quadrature,
            "kappa_target": self.kappa_target,
            "kappa_extrapolated": self.kappa_extrapolated,
            "quadrature_error_bound": self.quadrature_error_bound,
        }


def green_kubo_report(
    params: ChainParams,
    extrapolation_sizes=(32, 64, 128),
    n_samples: int = 200,
) -> GreenKuboReport:
    """Assemble the three-route report at params.n and extrapolate over sizes."""
    kappa_l = kappa_gk_lyapunov(params)
    kappa_s = kappa_gk_spectral(params)
    kappa_q, err_q = kappa_gk_quadrature(params)
    t_plot = np.linspace(0.0, 8.0 / params.alpha_lower, n_samples)
    samples = [(float(t), correlation_g(params, float(t))) for t in t_plot]
    extrapolated = None
    if extrapolation_sizes:
        vals = [
            kappa_gk_spectral(
                ChainParams(params.omega, params.gamma, params.lam, int(m))
            )
            for m in extrapolation_sizes
        ]
        extrapolated = richardson_extrapolate(list(extrapolation_sizes), vals)
    return GreenKuboReport(
        n=params.n,
        kappa_gk_lyapunov=kappa_l,
        kappa_gk_spectral=kappa_s,
        kappa_gk_quadrature=kappa_q,
        kappa_target=kappa_closed_form(params).kappa,
        g_samples=samples,
        kappa_extrapolated=extrapolated,
        quadrature_error_bound=err_q,
    )
