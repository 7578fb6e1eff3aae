"""crystalheat: heat transport in pinned harmonic lattices with self-consistent reservoirs.

Exact stationary states of the reservoir-coupled harmonic chain and its
higher-dimensional extensions: closed-form covariances, self-consistent
temperature profiles, steady currents and thermal conductivity by independent
routes (finite-size scaling, Green-Kubo, Brillouin-zone integrals), plus an
unbiased stochastic integrator for statistical cross-checks.
"""

__version__ = "0.1.0"

from .covariance import (
    CovarianceBlocks,
    DecayEstimate,
    TemperatureProfile,
    covariance_closed_form,
    decay_estimate,
    equilibrium_covariance,
    f_block,
    folded_coefficients,
    g_function,
    local_equilibrium_deviation,
    lyapunov_dense,
    lyapunov_dense_blocks,
    lyapunov_spectral_general,
)
from .greenkubo import (
    GreenKuboReport,
    correlation_g,
    green_kubo_report,
    kappa_gk_lyapunov,
    kappa_gk_quadrature,
    kappa_gk_spectral,
)
from .highdim import (
    LatticeSpec,
    ModeSet,
    appendix_c_representation,
    asymptotic_check,
    full_lattice_oracle,
    kappa_highdim_integral,
    kappa_highdim_sum,
    mode_set,
)
from .model import (
    ChainParams,
    CouplingProfile,
    SpectralData,
    build_current_matrix_k,
    build_drift,
    build_noise,
    build_phi,
    propagator_bound_report,
    propagator_norm,
    spectral_data,
)
from .montecarlo import (
    EstimatedMoments,
    SimulationConfig,
    convergence_rate,
    estimate_stationary,
    exact_step,
)
from .selfconsistency import (
    KineticMap,
    SelfConsistentSolution,
    contraction_norm,
    kinetic_map,
    solve_profile,
    solve_profile_general,
    solve_profile_highdim,
)
from .transport import (
    KappaResult,
    TransportReport,
    currents_from_covariance,
    finite_n_conductivity,
    epsilon_and_bounds,
    kappa_closed_form,
    kappa_integral,
    nonuniform_transport,
    profile_linearity,
    reservoir_fluxes,
    steady_state_report,
)

__all__ = [name for name in dir() if not name.startswith("_")]
