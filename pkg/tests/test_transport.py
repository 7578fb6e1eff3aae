import math

import numpy as np
import pytest

from crystalheat.covariance import (
    TemperatureProfile,
    covariance_closed_form,
    equilibrium_covariance,
    lyapunov_dense_blocks,
)
from crystalheat.model import ChainParams, CouplingProfile, build_phi
from crystalheat.selfconsistency import kinetic_map, solve_profile
from crystalheat.transport import (
    coupling_staircase,
    currents_from_covariance,
    epsilon_and_bounds,
    finite_n_conductivity,
    kappa_closed_form,
    kappa_integral,
    nonuniform_transport,
    profile_linearity,
    reservoir_fluxes,
    richardson_extrapolate,
    steady_state_report,
    zero_coupling_stretches,
)

KAPPA_UNIT = 1.0 / (3.0 + math.sqrt(5.0))


class TestCurrents:
    def test_equilibrium_is_currentless(self):
        p = ChainParams(1.0, 1.0, 1.0, 6)
        blocks = equilibrium_covariance(p, 1.2)
        assert np.max(np.abs(currents_from_covariance(blocks, p))) == 0.0

    def test_two_site_dual_formula(self):
        p = ChainParams(1.0, 1.0, 1.0, 2)
        temps = TemperatureProfile.from_values([1.0, 0.0])
        blocks = covariance_closed_form(p, temps)
        # the dual-route assertion inside must hold at 1e-10
        currents_from_covariance(blocks, p, dual_tol=1e-10)

    def test_constant_current_in_steady_state(self):
        p = ChainParams(1.0, 1.0, 1.0, 32)
        sol = solve_profile(p, 2.0, 1.0)
        blocks = covariance_closed_form(p, sol.profile)
        currents = currents_from_covariance(blocks, p)
        spread = np.max(currents) - np.min(currents)
        assert spread <= 1e-10 * abs(np.mean(currents))

    def test_entropy_production_sign(self):
        p = ChainParams(1.0, 1.0, 1.0, 12)
        for tl, tr in ((2.0, 1.0), (1.0, 2.0)):
            sol = solve_profile(p, tl, tr)
            rep = steady_state_report(p, sol)
            assert (tl - tr) * rep.j_n >= 0.0
            assert np.sign(rep.j_n) == np.sign(tl - tr)


class TestReservoirFluxes:
    def test_equilibrium_zero(self):
        p = ChainParams(1.0, 1.0, 1.0, 5)
        temps = TemperatureProfile.uniform(1.0, 5)
        blocks = covariance_closed_form(p, temps)
        fluxes = reservoir_fluxes(blocks, temps, CouplingProfile.uniform(1.0, 5))
        assert np.max(np.abs(fluxes)) < 1e-12

    def test_self_consistent_boundary_fluxes(self):
        p = ChainParams(1.0, 1.0, 1.0, 20)
        sol = solve_profile(p, 2.0, 1.0)
        rep = steady_state_report(p, sol)
        assert np.max(np.abs(rep.reservoir_fluxes[1:-1])) <= 1e-9
        assert rep.reservoir_fluxes[0] == pytest.approx(rep.j_n, abs=1e-9)
        assert rep.reservoir_fluxes[-1] == pytest.approx(-rep.j_n, abs=1e-9)

    def test_linear_profile_balances_globally(self):
        p = ChainParams(1.0, 1.0, 1.0, 16)
        temps = TemperatureProfile.linear(2.0, 1.0, 16)
        blocks = covariance_closed_form(p, temps)
        fluxes = reservoir_fluxes(blocks, temps, CouplingProfile.uniform(1.0, 16))
        assert abs(np.sum(fluxes)) < 1e-9
        assert np.max(np.abs(fluxes[1:-1])) > 1e-6  # not self-consistent


class TestKappa:
    def test_unit_parameters_value(self):
        assert kappa_closed_form(ChainParams(1.0, 1.0, 1.0, 2)).kappa == pytest.approx(
            KAPPA_UNIT, abs=1e-15
        )

    def test_homogeneity(self):
        base = kappa_closed_form(ChainParams(1.0, 1.0, 1.0, 2)).kappa
        doubled_omega = kappa_closed_form(ChainParams(2.0, 2.0, 1.0, 2)).kappa
        doubled_lam = kappa_closed_form(ChainParams(1.0, 1.0, 2.0, 2)).kappa
        assert doubled_omega == pytest.approx(4.0 * base, rel=1e-12)
        assert doubled_lam == pytest.approx(base / 2.0, rel=1e-12)

    def test_unpinned_limit(self):
        p = ChainParams(1.0, 1e-6, 1.0, 2)  # nu^2 = 1e-12
        kappa = kappa_closed_form(p).kappa
        assert kappa == pytest.approx(0.5, rel=1e-5)

    def test_integral_route_matches(self):
        for params in (
            ChainParams(1.0, 1.0, 1.0, 2),
            ChainParams(1.7, 0.4, 2.3, 2),
        ):
            ki = kappa_integral(params)
            assert ki.kappa == pytest.approx(
                kappa_closed_form(params).kappa, abs=1e-10
            )

    def test_integrand_symmetry(self):
        import scipy.integrate

        nu2 = 1.0
        f = lambda x: math.sin(math.pi * x) ** 2 / (
            nu2 + 4.0 * math.sin(math.pi * x / 2.0) ** 2
        )
        full, _ = scipy.integrate.quad(f, 0.0, 1.0, epsabs=1e-14)
        half, _ = scipy.integrate.quad(f, 0.0, 0.5, epsabs=1e-14)
        other, _ = scipy.integrate.quad(f, 0.5, 1.0, epsabs=1e-14)
        assert full == pytest.approx(half + other, abs=1e-13)

    def test_corner_element_approaches_limit(self):
        p = ChainParams(1.0, 1.0, 1.0, 400)
        phi_inv_corner = np.linalg.inv(build_phi(p))[0, 0]
        limit = 2.0 / p.omega**2 * KAPPA_UNIT
        assert abs(phi_inv_corner - limit) < 1e-2


class TestRichardson:
    def test_exact_on_polynomial(self):
        ns = np.array([10, 20, 40])
        vals = 3.0 + 2.0 / ns + 5.0 / ns**2
        assert richardson_extrapolate(ns, vals) == pytest.approx(3.0, abs=1e-12)

    def test_constant_sequence(self):
        assert richardson_extrapolate([4, 8], [1.5, 1.5]) == pytest.approx(1.5)


class TestFiniteN:
    def test_converges_to_closed_form(self):
        p = ChainParams(1.0, 1.0, 1.0, 2)
        scan = finite_n_conductivity(p, 2.0, 1.0, [16, 32, 64, 128])
        errors = [abs(v - KAPPA_UNIT) for _, v in scan.entries]
        assert all(b < a for a, b in zip(errors, errors[1:]))
        assert errors[-1] < errors[0]
        assert abs(scan.extrapolated - KAPPA_UNIT) / KAPPA_UNIT < 1e-3

    def test_swap_invariance(self):
        p = ChainParams(1.0, 1.0, 1.0, 2)
        fwd = finite_n_conductivity(p, 2.0, 1.0, [16, 24])
        rev = finite_n_conductivity(p, 1.0, 2.0, [16, 24])
        for (_, a), (_, b) in zip(fwd.entries, rev.entries):
            assert a == pytest.approx(b, rel=1e-10)

    def test_equal_temperatures_rejected(self):
        with pytest.raises(ValueError):
            finite_n_conductivity(ChainParams(1.0, 1.0, 1.0, 2), 1.0, 1.0, [8])


class TestEpsilonBound:
    def test_equilibrium_trivial(self):
        p = ChainParams(1.0, 1.0, 1.0, 16)
        sol = solve_profile(p, 1.0, 1.0)
        eps, bound, ratio = epsilon_and_bounds(sol, kinetic_map(p), p)
        assert eps == 0.0 and bound == pytest.approx(0.0, abs=1e-7)

    def test_bound_holds(self):
        p = ChainParams(1.0, 1.0, 1.0, 64)
        sol = solve_profile(p, 2.0, 1.0)
        eps, bound, ratio = epsilon_and_bounds(sol, kinetic_map(p), p)
        assert eps <= bound
        assert ratio <= 1.0

    def test_observed_scaling_exponent(self):
        eps_values = []
        ns = (16, 32, 64, 128)
        for n in ns:
            p = ChainParams(1.0, 1.0, 1.0, n)
            sol = solve_profile(p, 2.0, 1.0)
            eps_values.append(sol.profile.max_jump())
        slope, _ = np.polyfit(np.log(ns), np.log(eps_values), 1)
        assert -slope >= 0.5  # proven rate; observed is ~1


class TestLinearity:
    def test_inverse_identity_n20(self):
        p = ChainParams(1.0, 1.0, 1.0, 20)
        sol = solve_profile(p, 2.0, 1.0)
        report = profile_linearity(sol, p)
        assert report.inverse_identity_error <= 1e-10

    def test_three_sites_exactly_linear(self):
        p = ChainParams(1.0, 1.0, 1.0, 3)
        sol = solve_profile(p, 2.0, 1.0)
        assert profile_linearity(sol, p).residual < 1e-12

    def test_residual_shrinks_with_size(self):
        residuals = {}
        for n in (32, 128):
            p = ChainParams(1.0, 1.0, 1.0, n)
            sol = solve_profile(p, 2.0, 1.0)
            residuals[n] = profile_linearity(sol, p).residual
        assert residuals[128] < residuals[32]


class TestNonuniform:
    def test_uniform_couplings_reduce_to_total_current_identity(self):
        p = ChainParams(1.0, 1.0, 1.0, 16)
        cp = CouplingProfile.uniform(1.0, 16)
        rep = nonuniform_transport(p, cp, 2.0, 1.0)
        assert rep.lambda_bar == pytest.approx(
            (16.0 - 1.0) / 15.0, rel=1e-12
        )  # sum lam - (ends)/2 over N-1
        assert rep.identity_residual <= 1e-8
        assert rep.kappa_estimate == pytest.approx(
            steady_state_report(p, solve_profile(p, 2.0, 1.0)).kappa_estimate,
            rel=1e-9,
        )

    def test_every_second_coupling_doubles_kappa(self):
        p = ChainParams(1.0, 1.0, 1.0, 33)
        cp = CouplingProfile.every_mth(1.0, 2, 33)
        rep = nonuniform_transport(p, cp, 2.0, 1.0)
        assert abs(rep.kappa_estimate - 2.0 * KAPPA_UNIT) / (2.0 * KAPPA_UNIT) < 0.05
        assert max(rep.zero_stretch_flatness) <= 1e-8

    def test_piecewise_profile_follows_staircase(self):
        devs = {}
        for n in (32, 64):
            p = ChainParams(1.0, 1.0, 1.0, n)
            lams = np.where(np.arange(n) < n // 2, 0.5, 1.5)
            rep = nonuniform_transport(p, CouplingProfile(lams), 2.0, 1.0)
            devs[n] = rep.profile_deviation
            assert rep.current_spread <= 1e-9 * max(abs(rep.j_n), 1e-30)
        assert devs[64] < devs[32]

    def test_local_conductivity_tracks_coupling_density(self):
        n = 64
        p = ChainParams(1.0, 1.0, 1.0, n)
        lams = np.where(np.arange(n) < n // 2, 0.5, 1.5)
        rep = nonuniform_transport(p, CouplingProfile(lams), 2.0, 1.0)
        # away from the walls and the coupling interface, the per-bond
        # Fourier estimate matches omega^2/lam(x) up to O(1/N)
        for sl in (slice(8, 24), slice(40, 56)):
            rel = np.abs(
                rep.kappa_x_estimate[sl] - rep.kappa_x_prediction[sl]
            ) / rep.kappa_x_prediction[sl]
            assert np.max(rel) < 0.05
        # zero-coupling bonds advertise an infinite local conductivity
        rep2 = nonuniform_transport(
            ChainParams(1.0, 1.0, 1.0, 9), CouplingProfile.every_mth(1.0, 2, 9), 2.0, 1.0
        )
        assert np.all(np.isfinite(rep2.kappa_x_estimate))
        assert np.all(rep2.kappa_x_prediction > 0)

    def test_staircase_and_stretches(self):
        cp = CouplingProfile(np.array([1.0, 0.0, 0.0, 2.0, 0.0]))
        x, stair = coupling_staircase(cp)
        np.testing.assert_allclose(stair, [0.2, 0.2, 0.2, 0.6, 0.6])
        assert zero_coupling_stretches(cp) == [(1, 3), (4, 5)]


class TestReportShape:
    def test_equilibrium_report(self):
        p = ChainParams(1.0, 1.0, 1.0, 8)
        sol = solve_profile(p, 1.0, 1.0)
        rep = steady_state_report(p, sol)
        assert rep.kappa_estimate is None
        assert np.max(np.abs(rep.currents)) < 1e-12
        payload = rep.as_dict()
        assert payload["kappa_estimate"] is None
        assert len(payload["currents"]) == 7

    def test_dense_and_spectral_covariances_give_same_currents(self):
        p = ChainParams(1.0, 1.0, 1.0, 12)
        sol = solve_profile(p, 2.0, 1.0)
        spectral = covariance_closed_form(p, sol.profile)
        dense = lyapunov_dense_blocks(
            p, CouplingProfile.uniform(1.0, 12), sol.profile
        )
        j1 = currents_from_covariance(spectral, p)
        j2 = currents_from_covariance(dense, p)
        assert np.max(np.abs(j1 - j2)) < 1e-9
