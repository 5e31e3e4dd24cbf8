//! Decomposition of nonstationary scalar time series into piecewise
//! stationary oscillatory components.
//!
//! The model is a sum of complex AR(1) oscillators whose per-window powers
//! follow a random walk in log space. Fitting runs in two stages: window
//! powers and hyperparameters are estimated from per-window periodograms by
//! penalized Whittle likelihood (accelerated proximal gradient plus
//! conjugate-gradient refinement), then the latent trajectories, credible
//! intervals, posterior draws and phases come from a Kalman smoother and
//! forward-filter backward-sampling over the full record.

pub mod apg;
pub mod error;
pub mod model;
pub mod selection;
pub mod simbench;
pub mod state_space;
pub mod whittle;

pub use apg::{
    apg_fit_psi, block_coordinate_fit, prox_smoothness, refine_theta, ApgConfig, ApgOutput,
    ApgState, FitConfig, FitOutput, FitWarning,
};
pub use error::{PlsoError, Result};
pub use model::{
    autocovariance, component_spectrum, default_max_lengthscale, lyapunov_step, psd,
    rotation_matrix, simulate_generative, spectral_lobe, steady_state_covariance, Lambda,
    LatentTrajectory, LogVarianceField, ModelParams, SpectrumGrid, DEFAULT_LOG_POWER_BOUND,
};
pub use selection::{
    aic, aic_from_loglik, cross_validate_lambda, default_lambda_grid, estimate_obs_noise,
    initialize, select_j, JSelection, LambdaSelection,
};
pub use simbench::{
    is_divergence, jump_metric, mse_metric, run_benchmark, simulate_modulated_pair,
    windowed_independent_smooth, BenchmarkReport, BenchmarkRow, LambdaMode, MetricsReport,
    SimSpec, SimulationBundle,
};
pub use state_space::{
    ffbs_sample, kalman_smooth, phase_estimate, reconstruct_component, wrap_angle, ComponentBand,
    PhaseEstimate, PosteriorTrajectories, SampleEnsemble,
};
pub use whittle::{
    grad_loglik, lipschitz_bound, log_prior, objective_report, periodogram, whittle_loglik,
    ObjectiveReport, Periodogram,
};
