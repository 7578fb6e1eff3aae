import numpy as np
import pytest
import scipy.linalg

from crystalheat.covariance import TemperatureProfile, covariance_closed_form
from crystalheat.model import ChainParams, CouplingProfile, build_drift
from crystalheat.montecarlo import (
    SimulationConfig,
    convergence_rate,
    covariance_gap,
    estimate_stationary,
    exact_step,
    step_matrices,
    trajectory_rng,
)

P4 = ChainParams(1.0, 1.0, 1.0, 4)
CP4 = CouplingProfile.uniform(1.0, 4)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SimulationConfig(seed=1, step=0.0, total_time=1.0)
        with pytest.raises(ValueError):
            SimulationConfig(seed=1, step=0.1, total_time=-1.0)
        with pytest.raises(ValueError):
            SimulationConfig(seed=1, step=0.1, total_time=1.0, trajectories=0)

    def test_default_burn_in(self):
        cfg = SimulationConfig(seed=1, step=0.1, total_time=10.0)
        assert cfg.resolve_burn_in(P4) == pytest.approx(10.0 / P4.alpha_lower)
        cfg2 = SimulationConfig(seed=1, step=0.1, total_time=10.0, burn_in=3.0)
        assert cfg2.resolve_burn_in(P4) == 3.0


class TestExactStep:
    def test_zero_noise_zero_state_stays_zero(self):
        temps = TemperatureProfile.uniform(0.0, 4)
        rng = trajectory_rng(0, 0)
        state = np.zeros(8)
        for _ in range(5):
            state = exact_step(state, 0.3, P4, CP4, temps, rng)
        assert np.all(state == 0.0)

    def test_deterministic_mean_decay(self):
        temps = TemperatureProfile.uniform(0.0, 4)
        e_h, g = step_matrices(P4, CP4, temps, 0.5)
        assert np.all(g == 0.0)
        state = np.zeros(8)
        state[0] = 1.0
        for _ in range(10):
            state = e_h @ state
        a = build_drift(P4, CP4)
        expected = scipy.linalg.expm(-5.0 * a)[:, 0]
        assert np.max(np.abs(state - expected)) <= 1e-10

    def test_half_step_chaining(self):
        temps = TemperatureProfile.uniform(1.0, 4)
        e_half, g_half = step_matrices(P4, CP4, temps, 0.25)
        e_full, g_full = step_matrices(P4, CP4, temps, 0.5)
        assert np.max(np.abs(e_half @ e_half - e_full)) <= 1e-12
        q_half = g_half @ g_half.T
        q_full = g_full @ g_full.T
        chained = e_half @ q_half @ e_half.T + q_half
        assert np.max(np.abs(chained - q_full)) <= 1e-12

    def test_increment_covariance_is_psd(self):
        temps = TemperatureProfile.linear(2.0, 0.0, 4)
        for h in (0.01, 0.1, 1.0, 10.0):
            _, g = step_matrices(P4, CP4, temps, h)
            q = g @ g.T
            assert np.min(np.linalg.eigvalsh((q + q.T) / 2.0)) >= -1e-12

    def test_seeded_determinism(self):
        temps = TemperatureProfile.uniform(1.0, 4)
        out = []
        for _ in range(2):
            rng = trajectory_rng(123, 5)
            state = np.zeros(8)
            for _ in range(50):
                state = exact_step(state, 0.2, P4, CP4, temps, rng)
            out.append(state.copy())
        np.testing.assert_array_equal(out[0], out[1])

    def test_nondissipative_rejected(self):
        with pytest.raises(ValueError):
            step_matrices(
                ChainParams(1.0, 1.0, 0.0, 2),
                CouplingProfile.uniform(0.0, 2),
                TemperatureProfile.uniform(1.0, 2),
                0.1,
            )


class TestStationaryEstimates:
    def test_single_site_momentum_variance(self):
        p1 = ChainParams(1.0, 1.0, 1.0, 1)
        cp1 = CouplingProfile.uniform(1.0, 1)
        temps = TemperatureProfile.uniform(1.0, 1)
        cfg = SimulationConfig(seed=2024, step=0.2, total_time=2.0e4)
        moments = estimate_stationary(cfg, p1, cp1, temps)
        assert moments.n_samples == 100000
        stderr = moments.cov_stderr[1, 1]
        assert abs(moments.cov[1, 1] - 1.0) <= 3.0 * stderr

    def test_equilibrium_covariance_entries(self):
        temps = TemperatureProfile.uniform(1.0, 4)
        cfg = SimulationConfig(seed=42, step=0.25, total_time=1.0e4)
        moments = estimate_stationary(cfg, P4, CP4, temps)
        exact = covariance_closed_form(P4, temps).full()
        iu = np.triu_indices(8)
        z = np.abs(moments.cov - exact)[iu] / moments.cov_stderr[iu]
        assert np.mean(z <= 4.0) >= 0.95

    def test_self_consistent_current_estimate(self):
        from crystalheat.selfconsistency import solve_profile
        from crystalheat.transport import currents_from_covariance

        p8 = ChainParams(1.0, 1.0, 1.0, 8)
        cp8 = CouplingProfile.uniform(1.0, 8)
        sol = solve_profile(p8, 2.0, 1.0)
        blocks = covariance_closed_form(p8, sol.profile)
        exact_j = currents_from_covariance(blocks, p8)
        cfg = SimulationConfig(seed=7, step=0.25, total_time=2.0e4)
        moments = estimate_stationary(cfg, p8, cp8, sol.profile)
        z = np.abs(moments.current_estimates - exact_j) / moments.current_stderr
        assert np.all(z <= 4.0)

    def test_cross_block_antisymmetric_within_noise(self):
        from crystalheat.selfconsistency import solve_profile

        p8 = ChainParams(1.0, 1.0, 1.0, 8)
        cp8 = CouplingProfile.uniform(1.0, 8)
        sol = solve_profile(p8, 2.0, 1.0)
        cfg = SimulationConfig(seed=11, step=0.25, total_time=1.0e4)
        moments = estimate_stationary(cfg, p8, cp8, sol.profile)
        z_block = moments.cov[:8, 8:]
        stderr = moments.cov_stderr[:8, 8:]
        sym = np.abs(z_block + z_block.T)
        scale = np.sqrt(stderr**2 + stderr.T**2)
        assert np.all(sym <= 5.0 * scale + 1e-12)

    def test_energy_balance_within_noise(self):
        from crystalheat.selfconsistency import solve_profile

        p6 = ChainParams(1.0, 1.0, 1.0, 6)
        cp6 = CouplingProfile.uniform(1.0, 6)
        sol = solve_profile(p6, 2.0, 1.0)
        cfg = SimulationConfig(seed=5, step=0.25, total_time=1.0e4)
        moments = estimate_stationary(cfg, p6, cp6, sol.profile)
        p_second = np.diag(moments.cov[6:, 6:]) + moments.mean[6:] ** 2
        total_flux = float(np.sum(cp6.lambdas * (sol.profile.temps - p_second)))
        sigma = float(
            np.sqrt(np.sum((cp6.lambdas * np.diag(moments.cov_stderr[6:, 6:])) ** 2))
        )
        assert abs(total_flux) <= 4.0 * sigma

    def test_too_short_run_rejected(self):
        cfg = SimulationConfig(seed=1, step=1.0, total_time=5.0)
        with pytest.raises(ValueError):
            estimate_stationary(cfg, P4, CP4, TemperatureProfile.uniform(1.0, 4))


class TestConvergenceRate:
    CFG = SimulationConfig(seed=1, step=0.1, total_time=10.0)

    def test_rate_meets_envelope(self):
        temps = TemperatureProfile.uniform(1.0, 4)
        rate = convergence_rate(self.CFG, P4, CP4, temps)
        assert rate >= 0.9 * 2.0 * P4.alpha_lower

    def test_rate_independent_of_temperature_scale(self):
        r1 = convergence_rate(self.CFG, P4, CP4, TemperatureProfile.uniform(1.0, 4))
        r10 = convergence_rate(self.CFG, P4, CP4, TemperatureProfile.uniform(10.0, 4))
        assert abs(r1 - r10) <= 1e-6

    def test_long_time_gap_is_negligible(self):
        temps = TemperatureProfile.uniform(1.0, 4)
        gap = covariance_gap(P4, CP4, temps, 60.0 / P4.alpha_lower)
        assert gap < 1e-8

    def test_nonuniform_rejected(self):
        cp = CouplingProfile(np.array([1.0, 0.5, 1.0, 0.5]))
        with pytest.raises(ValueError):
            convergence_rate(self.CFG, P4, cp, TemperatureProfile.uniform(1.0, 4))
