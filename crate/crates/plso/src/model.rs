//! Generative model for a superposition of piecewise stationary oscillators.
//!
//! Each component j is a complex AR(1) process written as a 2-d real state
//! `z[j,k] = [Re, Im]` that rotates by `omega_j` radians per sample and decays
//! with lengthscale `l_j` (seconds). Within window m the component has power
//! `sigma2[j,m]`; the observation is the sum of the real parts plus white
//! noise. This module holds the parameter types, the closed-form second-order
//! quantities (autocovariance, spectra, steady-state covariance) and the
//! forward simulator.

use nalgebra::{Matrix2, Vector2};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::error::{PlsoError, Result};

/// Box bound on log powers, |psi| <= 30. Wide enough to be inactive for any
/// realistic signal while keeping the objective's gradient Lipschitz bound
/// finite.
pub const DEFAULT_LOG_POWER_BOUND: f64 = 30.0;

/// Default upper bound on lengthscales for a window of `window_len` samples.
pub fn default_max_lengthscale(window_len: usize, delta: f64) -> f64 {
    0.25 * window_len as f64 * delta
}

/// Smoothness weight for the window-to-window random walk on log powers.
///
/// `Stationary` is the limiting case of an infinite weight: all windows share
/// one power per component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Value(f64),
    Stationary,
}

impl Lambda {
    pub fn is_stationary(&self) -> bool {
        matches!(self, Lambda::Stationary)
    }

    /// Finite weight, if any.
    pub fn value(&self) -> Option<f64> {
        match self {
            Lambda::Value(v) => Some(*v),
            Lambda::Stationary => None,
        }
    }
}

impl std::fmt::Display for Lambda {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Lambda::Value(v) => write!(f, "{v}"),
            Lambda::Stationary => write!(f, "stationary"),
        }
    }
}

/// Hyperparameters of the model: sampling interval, smoothness weight,
/// observation noise variance and per-component lengthscales (seconds) and
/// center frequencies (radians per sample).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub delta: f64,
    pub lambda: Lambda,
    pub obs_noise_var: f64,
    pub lengthscales: Vec<f64>,
    pub center_freqs: Vec<f64>,
    /// Upper bound imposed on lengthscales during estimation.
    pub max_lengthscale: f64,
}

impl ModelParams {
    pub fn new(
        delta: f64,
        lambda: Lambda,
        obs_noise_var: f64,
        lengthscales: Vec<f64>,
        center_freqs: Vec<f64>,
        max_lengthscale: f64,
    ) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(PlsoError::InvalidParameter(format!(
                "delta must be positive, got {delta}"
            )));
        }
        if let Lambda::Value(v) = lambda {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PlsoError::InvalidParameter(format!(
                    "lambda must be nonnegative, got {v}"
                )));
            }
        }
        if !(obs_noise_var.is_finite() && obs_noise_var > 0.0) {
            return Err(PlsoError::InvalidParameter(format!(
                "observation noise variance must be positive, got {obs_noise_var}"
            )));
        }
        if lengthscales.len() != center_freqs.len() {
            return Err(PlsoError::DimensionMismatch(format!(
                "{} lengthscales vs {} center frequencies",
                lengthscales.len(),
                center_freqs.len()
            )));
        }
        if !(max_lengthscale.is_finite() && max_lengthscale > 0.0) {
            return Err(PlsoError::InvalidParameter(format!(
                "max lengthscale must be positive, got {max_lengthscale}"
            )));
        }
        for (j, &l) in lengthscales.iter().enumerate() {
            if !(l.is_finite() && l > 0.0 && l <= max_lengthscale) {
                return Err(PlsoError::InvalidParameter(format!(
                    "lengthscale {j} must lie in (0, {max_lengthscale}], got {l}"
                )));
            }
            // Process stability: rho = exp(-delta/l) must stay strictly inside
            // (0, 1); rho underflows to zero once delta/l exceeds ~708.
            let rho = (-delta / l).exp();
            if !(rho > 0.0 && rho < 1.0) {
                return Err(PlsoError::InvalidParameter(format!(
                    "lengthscale {j} = {l} gives unstable decay rho = {rho}"
                )));
            }
        }
        for (j, &w) in center_freqs.iter().enumerate() {
            if !(w.is_finite() && (0.0..=PI).contains(&w)) {
                return Err(PlsoError::InvalidParameter(format!(
                    "center frequency {j} must lie in [0, pi], got {w}"
                )));
            }
        }
        Ok(ModelParams {
            delta,
            lambda,
            obs_noise_var,
            lengthscales,
            center_freqs,
            max_lengthscale,
        })
    }

    pub fn n_components(&self) -> usize {
        self.lengthscales.len()
    }

    /// Per-sample amplitude decay rho_j = exp(-delta/l_j).
    pub fn decay(&self, j: usize) -> f64 {
        (-self.delta / self.lengthscales[j]).exp()
    }

    /// State-noise variance per coordinate, sigma2 * (1 - rho_j^2).
    pub fn innovation_var(&self, j: usize, sigma2: f64) -> f64 {
        sigma2 * (1.0 - self.decay(j).powi(2))
    }
}

/// J x M matrix of log powers psi[j,m] = log sigma2[j,m], together with the
/// window length the fit used.
#[derive(Debug, Clone, PartialEq)]
pub struct LogVarianceField {
    values: Array2<f64>,
    window_len: usize,
}

impl LogVarianceField {
    pub fn new(values: Array2<f64>, window_len: usize) -> Result<Self> {
        if window_len < 2 {
            return Err(PlsoError::InvalidParameter(format!(
                "window length must be at least 2, got {window_len}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PlsoError::Numerical(
                "log variance field contains non-finite entries".into(),
            ));
        }
        Ok(LogVarianceField { values, window_len })
    }

    /// Constant field psi[j,m] = value.
    pub fn constant(n_components: usize, n_windows: usize, window_len: usize, value: f64) -> Result<Self> {
        Self::new(Array2::from_elem((n_components, n_windows), value), window_len)
    }

    /// Builds the field from per-component rows of log powers.
    pub fn from_rows(rows: &[Vec<f64>], window_len: usize) -> Result<Self> {
        let n_components = rows.len();
        let n_windows = rows.first().map(|r| r.len()).unwrap_or(0);
        if n_components == 0 || n_windows == 0 {
            return Err(PlsoError::InvalidParameter(
                "log variance field must have at least one component and window".into(),
            ));
        }
        let mut flat = Vec::with_capacity(n_components * n_windows);
        for row in rows {
            if row.len() != n_windows {
                return Err(PlsoError::DimensionMismatch(
                    "log variance rows have unequal lengths".into(),
                ));
            }
            flat.extend_from_slice(row);
        }
        let values = Array2::from_shape_vec((n_components, n_windows), flat)
            .expect("shape checked above");
        Self::new(values, window_len)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_components(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_windows(&self) -> usize {
        self.values.ncols()
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Total number of samples K = M * N covered by the field.
    pub fn n_samples(&self) -> usize {
        self.n_windows() * self.window_len
    }

    /// Log powers of window m, one entry per component.
    pub fn window(&self, m: usize) -> Vec<f64> {
        self.values.column(m).to_vec()
    }

    /// sigma2[j,m] = exp(psi[j,m]).
    pub fn variance(&self, j: usize, m: usize) -> f64 {
        self.values[[j, m]].exp()
    }

    /// Window index of sample k (0-based).
    pub fn window_of_sample(&self, k: usize) -> usize {
        k / self.window_len
    }
}

/// Latent trajectories: K x J x 2 array of [Re, Im] states.
#[derive(Debug, Clone)]
pub struct LatentTrajectory {
    pub states: Array3<f64>,
    pub delta: f64,
}

impl LatentTrajectory {
    pub fn n_samples(&self) -> usize {
        self.states.shape()[0]
    }

    pub fn n_components(&self) -> usize {
        self.states.shape()[1]
    }

    /// Real part of component j over time.
    pub fn real_part(&self, j: usize) -> Vec<f64> {
        (0..self.n_samples()).map(|k| self.states[[k, j, 0]]).collect()
    }
}

/// Model spectra evaluated on the zero-based DFT grid omega_n = 2 pi n / N.
#[derive(Debug, Clone)]
pub struct SpectrumGrid {
    pub freqs: Vec<f64>,
    /// J x N per-component spectral densities.
    pub per_component: Array2<f64>,
    /// Total PSD: observation noise plus the component sum, per grid point.
    pub total: Vec<f64>,
}

/// 2-d rotation by `omega` radians.
pub fn rotation_matrix(omega: f64) -> Matrix2<f64> {
    let (s, c) = omega.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Autocovariance of the real part of component j at lag `n_lag`:
/// sigma2 * cos(omega_j n) * exp(-n delta / l_j).
pub fn autocovariance(params: &ModelParams, j: usize, sigma2: f64, n_lag: usize) -> f64 {
    let n = n_lag as f64;
    sigma2 * (params.center_freqs[j] * n).cos() * (-n * params.delta / params.lengthscales[j]).exp()
}

/// One-sided resonance of component j: the spectral lobe centered at
/// +omega_j, with peak value sigma2 (1 + rho) / (1 - rho) at omega = omega_j.
pub fn spectral_lobe(params: &ModelParams, j: usize, sigma2: f64, omega: f64) -> f64 {
    let rho = params.decay(j);
    // 1 - rho without cancellation, and the denominator rewritten as
    // (1 - rho)^2 + 4 rho sin^2(x/2), which equals 1 + rho^2 - 2 rho cos(x)
    // but stays accurate near the peak.
    let one_minus_rho = -(-params.delta / params.lengthscales[j]).exp_m1();
    let num = sigma2 * one_minus_rho * (1.0 + rho);
    let half = 0.5 * (omega - params.center_freqs[j]);
    num / (one_minus_rho * one_minus_rho + 4.0 * rho * half.sin().powi(2))
}

/// Spectral density of the real part of component j: the Fourier transform of
/// `autocovariance`, i.e. half the sum of the lobes at +omega_j and -omega_j.
/// Even in omega and strictly positive.
pub fn component_spectrum(params: &ModelParams, j: usize, sigma2: f64, omega: f64) -> f64 {
    0.5 * (spectral_lobe(params, j, sigma2, omega) + spectral_lobe(params, j, sigma2, -omega))
}

/// Model PSD of one window on the DFT grid of size `window_len`, given that
/// window's log powers (one per component). The total satisfies
/// `total[n] = obs_noise_var + sum_j per_component[j][n]` exactly.
pub fn psd(params: &ModelParams, window_log_vars: &[f64], window_len: usize) -> Result<SpectrumGrid> {
    if window_len < 2 {
        return Err(PlsoError::InvalidParameter(format!(
            "PSD grid needs window length >= 2, got {window_len}"
        )));
    }
    if window_log_vars.len() != params.n_components() {
        return Err(PlsoError::DimensionMismatch(format!(
            "{} log variances for {} components",
            window_log_vars.len(),
            params.n_components()
        )));
    }
    let n = window_len;
    let freqs: Vec<f64> = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
    let mut per_component = Array2::zeros((params.n_components(), n));
    let mut total = vec![params.obs_noise_var; n];
    for j in 0..params.n_components() {
        let sigma2 = window_log_vars[j].exp();
        for (i, &w) in freqs.iter().enumerate() {
            let s = component_spectrum(params, j, sigma2, w);
            per_component[[j, i]] = s;
            total[i] += s;
        }
    }
    Ok(SpectrumGrid {
        freqs,
        per_component,
        total,
    })
}

/// Steady-state covariance of component j at power sigma2. The fixed point of
/// the discrete Lyapunov map is sigma2 * I.
pub fn steady_state_covariance(_params: &ModelParams, _j: usize, sigma2: f64) -> Matrix2<f64> {
    Matrix2::identity() * sigma2
}

/// One application of the discrete Lyapunov map for component j:
/// P -> rho^2 R P R' + sigma2 (1 - rho^2) I.
pub fn lyapunov_step(params: &ModelParams, j: usize, sigma2: f64, p: &Matrix2<f64>) -> Matrix2<f64> {
    let rho = params.decay(j);
    let r = rotation_matrix(params.center_freqs[j]);
    r * p * r.transpose() * (rho * rho) + Matrix2::identity() * params.innovation_var(j, sigma2)
}

/// Draws one realization of the generative model: latent rotations driven by
/// window-dependent state noise, observed as the sum of real parts plus white
/// noise. Deterministic for a fixed seed.
pub fn simulate_generative(
    params: &ModelParams,
    window_vars: &LogVarianceField,
    seed: u64,
) -> Result<(Vec<f64>, LatentTrajectory)> {
    if window_vars.n_components() != params.n_components() {
        return Err(PlsoError::DimensionMismatch(format!(
            "field has {} components, params have {}",
            window_vars.n_components(),
            params.n_components()
        )));
    }
    let n_comp = params.n_components();
    let k_total = window_vars.n_samples();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise_std = params.obs_noise_var.sqrt();

    let rotations: Vec<Matrix2<f64>> = (0..n_comp)
        .map(|j| rotation_matrix(params.center_freqs[j]) * params.decay(j))
        .collect();

    let mut states = Array3::zeros((k_total, n_comp, 2));
    let mut observations = Vec::with_capacity(k_total);
    let mut z: Vec<Vector2<f64>> = Vec::with_capacity(n_comp);

    for k in 0..k_total {
        let m = window_vars.window_of_sample(k);
        for j in 0..n_comp {
            let e1: f64 = rng.sample(StandardNormal);
            let e2: f64 = rng.sample(StandardNormal);
            if k == 0 {
                let std0 = window_vars.variance(j, 0).sqrt();
                z.push(Vector2::new(e1 * std0, e2 * std0));
            } else {
                let std_inn = params.innovation_var(j, window_vars.variance(j, m)).sqrt();
                z[j] = rotations[j] * z[j] + Vector2::new(e1 * std_inn, e2 * std_inn);
            }
            states[[k, j, 0]] = z[j].x;
            states[[k, j, 1]] = z[j].y;
        }
        let nu: f64 = rng.sample(StandardNormal);
        let y: f64 = (0..n_comp).map(|j| z[j].x).sum::<f64>() + nu * noise_std;
        observations.push(y);
    }

    Ok((
        observations,
        LatentTrajectory {
            states,
            delta: params.delta,
        },
    ))
}
