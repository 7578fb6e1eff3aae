"""Acceptance suite: every promised deliverable at its stated tolerance.

Each criterion prints its own pass line (run with ``pytest -v -s`` to see
them); runtime-limited criteria assert their wall-clock budget.
"""

import math
import time

import numpy as np
import scipy.linalg

from crystalheat.covariance import (
    TemperatureProfile,
    covariance_closed_form,
    lyapunov_dense_blocks,
    lyapunov_spectral_general,
)
from crystalheat.greenkubo import (
    kappa_gk_lyapunov,
    kappa_gk_quadrature,
    kappa_gk_spectral,
)
from crystalheat.highdim import (
    LatticeSpec,
    asymptotic_check,
    bz_time_kernels,
    full_lattice_oracle,
)
from crystalheat.model import (
    ChainParams,
    CouplingProfile,
    build_drift,
    propagator_envelope,
    propagator_norm,
    spectral_data,
)
from crystalheat.montecarlo import (
    SimulationConfig,
    estimate_stationary,
    step_matrices,
)
from crystalheat.selfconsistency import (
    contraction_norm,
    kinetic_map,
    solve_profile,
)
from crystalheat.transport import (
    epsilon_and_bounds,
    finite_n_conductivity,
    nonuniform_transport,
    profile_linearity,
    richardson_extrapolate,
)

KAPPA = 1.0 / (3.0 + math.sqrt(5.0))


def report(num: int, label: str):
    print(f"\ncriterion {num:02d} PASS  {label}")


class Timer:
    def __init__(self, limit: float):
        self.limit = limit

    def __enter__(self):
        self.start = time.monotonic()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.monotonic() - self.start
        if exc == (None, None, None):
            assert self.elapsed < self.limit, (
                f"runtime {self.elapsed:.1f}s exceeds {self.limit:.0f}s budget"
            )
        return False


def test_criterion_01_conductivity_convergence():
    with Timer(60.0):
        p = ChainParams(1.0, 1.0, 1.0, 2)
        scan = finite_n_conductivity(p, 2.0, 1.0, [16, 32, 64, 128])
        errors = [abs(v - KAPPA) for _, v in scan.entries]
        assert all(b < a for a, b in zip(errors, errors[1:])), "not converging"
        rel = abs(scan.extrapolated - KAPPA) / KAPPA
        assert rel < 1e-3, f"extrapolation off by {rel:.2e}"
    report(1, f"(N-1)J/(TL-TR) -> kappa, extrapolated rel err {rel:.2e}")


def test_criterion_02_green_kubo_equality():
    with Timer(120.0):
        p64 = ChainParams(1.0, 1.0, 1.0, 64)
        kl = kappa_gk_lyapunov(p64)
        ks = kappa_gk_spectral(p64)
        kq, _ = kappa_gk_quadrature(p64)
        assert abs(kl - ks) <= 1e-6
        assert abs(kl - kq) <= 1e-6
        assert abs(ks - kq) <= 1e-6
        sizes = [32, 64, 128]
        vals = [kappa_gk_spectral(ChainParams(1.0, 1.0, 1.0, n)) for n in sizes]
        extrapolated = richardson_extrapolate(sizes, vals)
        rel = abs(extrapolated - KAPPA) / KAPPA
        assert rel < 1e-3, f"extrapolation off by {rel:.2e}"
    report(
        2,
        f"three Green-Kubo routes agree (max gap {max(abs(kl-ks), abs(kl-kq)):.1e}), "
        f"extrapolate to kappa rel err {rel:.2e}",
    )


def test_criterion_03_self_consistency_structure():
    p64 = ChainParams(1.0, 1.0, 1.0, 64)
    kmap = kinetic_map(p64)
    assert np.max(np.abs(kmap.m.sum(axis=1) - 1.0)) <= 1e-10
    assert np.max(np.abs(kmap.m.sum(axis=0) - 1.0)) <= 1e-10
    assert kmap.m.min() >= -1e-12
    q = contraction_norm(kmap)
    assert q < 1.0
    profiles = [
        solve_profile(p64, 2.0, 1.0, method="neumann", init=init).profile.temps
        for init in ("flat_right", "flat_left", "linear")
    ]
    spread = max(
        float(np.max(np.abs(profiles[0] - profiles[1]))),
        float(np.max(np.abs(profiles[0] - profiles[2]))),
    )
    assert spread <= 1e-9, f"initialization spread {spread:.2e}"
    assert profiles[0].min() >= 1.0 - 1e-12 and profiles[0].max() <= 2.0 + 1e-12
    residuals = {}
    for n in (32, 128):
        pn = ChainParams(1.0, 1.0, 1.0, n)
        residuals[n] = profile_linearity(solve_profile(pn, 2.0, 1.0), pn).residual
    assert residuals[128] < residuals[32]
    report(
        3,
        f"M doubly stochastic, |Q| = {q:.6f} < 1, init spread {spread:.1e}, "
        f"linearity residual {residuals[128]:.2e} < {residuals[32]:.2e}",
    )


def test_criterion_04_route_equivalence():
    with Timer(30.0):
        rng = np.random.default_rng(2024)
        worst = 0.0
        for n in (4, 8, 16):
            p = ChainParams(1.0, 1.0, 1.0, n)
            cp = CouplingProfile.uniform(1.0, n)
            for _ in range(10):
                temps = TemperatureProfile.from_values(rng.uniform(0.5, 2.5, n))
                cf = covariance_closed_form(p, temps).full()
                dn = lyapunov_dense_blocks(p, cp, temps).full()
                sg = lyapunov_spectral_general(
                    p, np.zeros((n, n)), np.diag(temps.temps)
                ).full()
                worst = max(
                    worst,
                    float(np.linalg.norm(cf - dn, 2)),
                    float(np.linalg.norm(cf - sg, 2)),
                    float(np.linalg.norm(dn - sg, 2)),
                )
        assert worst <= 1e-8, f"route disagreement {worst:.2e}"
    report(4, f"closed form = dense Lyapunov = spectral general, worst gap {worst:.1e}")


def test_criterion_05_epsilon_scaling():
    sizes = (16, 32, 64, 128, 256)
    eps_values = []
    for n in sizes:
        p = ChainParams(1.0, 1.0, 1.0, n)
        sol = solve_profile(p, 2.0, 1.0)
        eps, bound, ratio = epsilon_and_bounds(sol, kinetic_map(p), p)
        assert eps <= bound, f"bound violated at N={n}"
        eps_values.append(eps)
    slope, _ = np.polyfit(np.log(sizes), np.log(eps_values), 1)
    exponent = -slope
    assert exponent >= 0.5, f"decay exponent {exponent:.3f} below 1/2"
    report(
        5,
        f"eps_N bounded by sqrt(c (TL-TR) J) at all N; fitted exponent {exponent:.3f} "
        "(observed ~1/N, reported not asserted)",
    )


def test_criterion_06_highdim_reduction():
    with Timer(60.0):
        params = ChainParams(1.0, 1.0, 1.0, 8)
        res = full_lattice_oracle(LatticeSpec(8, (4,), params), 2.0, 1.0)
        gap = float(np.max(np.abs(res.j_long - res.mode_sum_currents[:, None])))
        assert gap <= 1e-7, f"mode decomposition gap {gap:.2e}"
        assert np.max(np.abs(res.j_trans)) <= 1e-9
        assert res.transverse_spread <= 1e-9
    report(
        6,
        f"2-d lattice oracle matches mode sum ({gap:.1e}); transverse currents "
        f"{np.max(np.abs(res.j_trans)):.1e}, profile transverse-constant",
    )


def test_criterion_07_asymptotics():
    i0_zero, i1_zero = bz_time_kernels(0.0)
    assert abs(i0_zero - 1.0) <= 1e-12 and abs(i1_zero - 0.5) <= 1e-12
    grid = np.geomspace(1e-6, 200.0, 128)
    i0_vals, _ = bz_time_kernels(grid)
    assert np.all(i0_vals <= 1.0 / np.sqrt(1.0 + grid) + 1e-12)
    rows = asymptotic_check(ChainParams(1.0, 1.0, 1.0, 2), [2, 4, 8, 16, 32, 64])
    errs = [r[2] for r in rows]
    assert all(b < a for a, b in zip(errs, errs[1:])), "dI not strictly improving"
    assert errs[-1] < 0.01
    report(
        7,
        f"d*I -> 1/4 strictly improving, |64*I - 1/4| = {errs[-1]:.2e}; kernel "
        "values and envelope verified",
    )


def test_criterion_08_nonuniform_couplings():
    p = ChainParams(1.0, 1.0, 1.0, 65)
    cp = CouplingProfile.every_mth(1.0, 2, 65)
    rep = nonuniform_transport(p, cp, 2.0, 1.0)
    rel = abs(rep.kappa_estimate - 2.0 * KAPPA) / (2.0 * KAPPA)
    assert rel < 0.05, f"every-2nd conductivity off by {rel:.1%}"
    flat = max(rep.zero_stretch_flatness)
    assert flat <= 1e-8, f"zero-coupling stretch varies by {flat:.2e}"
    report(
        8,
        f"every-2nd coupling gives 2*kappa within {rel:.1%}; zero-coupling "
        f"stretches flat to {flat:.1e}",
    )


def test_criterion_09_monte_carlo_oracle():
    with Timer(120.0):
        p = ChainParams(1.0, 1.0, 1.0, 4)
        cp = CouplingProfile.uniform(1.0, 4)
        temps = TemperatureProfile.uniform(1.0, 4)
        cfg = SimulationConfig(seed=20240, step=0.25, total_time=1.0e4)
        moments = estimate_stationary(cfg, p, cp, temps)
        exact = covariance_closed_form(p, temps).full()
        iu = np.triu_indices(8)
        z = np.abs(moments.cov - exact)[iu] / moments.cov_stderr[iu]
        frac = float(np.mean(z <= 4.0))
        assert frac >= 0.95, f"only {frac:.0%} of entries within 4 sigma"
        # deterministic mean propagation
        e_h, g = step_matrices(p, cp, TemperatureProfile.uniform(0.0, 4), 0.5)
        state = np.zeros(8)
        state[0] = 1.0
        for _ in range(8):
            state = e_h @ state
        expected = scipy.linalg.expm(-4.0 * build_drift(p, cp))[:, 0]
        mean_err = float(np.max(np.abs(state - expected)))
        assert mean_err <= 1e-10
    report(
        9,
        f"{frac:.0%} of covariance entries within 4 batch-means sigma; "
        f"deterministic mean decay error {mean_err:.1e}",
    )


def test_criterion_10_propagator_bound():
    # closed form against the dense exponential
    worst = 0.0
    for n in (7, 19, 30):
        p = ChainParams(1.0, 1.0, 1.0, n)
        a = build_drift(p, CouplingProfile.uniform(1.0, n))
        for t in (0.3, 1.0, 2.5, 6.0):
            dense = float(np.linalg.norm(scipy.linalg.expm(-t * a), 2))
            worst = max(worst, abs(propagator_norm(p, t) - dense))
    assert worst <= 1e-9, f"mode exponential off by {worst:.2e}"
    # envelope on a grid for three parameter sets, one of them nearly degenerate
    mu4 = spectral_data(ChainParams(1.0, 1.0, 1.0, 8)).mu[3]
    param_sets = [
        ChainParams(1.0, 1.0, 1.0, 30),
        ChainParams(2.0, 0.5, 3.0, 12),
        ChainParams(1.0, 1.0, 2.0 * math.sqrt(mu4), 8),  # rho_4 = 0 exactly
    ]
    t_grid = np.linspace(0.0, 12.0, 49)
    for p in param_sets:
        for t in t_grid:
            assert propagator_norm(p, float(t)) <= float(
                propagator_envelope(p, t)
            ) * (1.0 + 1e-12)
    report(
        10,
        f"mode closed form matches dense exponential to {worst:.1e}; decay envelope "
        "holds on the grid for all parameter sets incl. a degenerate mode",
    )
