//! Benchmark harness: a two-component amplitude-modulated dataset with known
//! ground truth, the evaluation metrics (trajectory MSE, boundary jump,
//! Itakura-Saito divergence between spectrograms) and a runner that fits the
//! model under several smoothness regimes and tabulates averaged metrics.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use std::time::Instant;

use crate::apg::{block_coordinate_fit, FitConfig};
use crate::error::{PlsoError, Result};
use crate::model::{rotation_matrix, spectral_lobe, Lambda, LogVarianceField, ModelParams};
use crate::selection::{cross_validate_lambda, default_lambda_grid};
use crate::state_space::{kalman_smooth, reconstruct_component};

/// Generating recipe: two unit-power oscillators, one under a linearly
/// decaying envelope and one under a slow cos^4 envelope, observed in white
/// noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    /// Envelope modulation rate (Hz) for the second component.
    pub slow_freq_hz: f64,
    /// Center frequencies (Hz) of the two oscillators.
    pub center_freqs_hz: [f64; 2],
    /// Lengthscales (seconds).
    pub lengthscales_s: [f64; 2],
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub noise_var: f64,
    /// Peak envelope amplitude applied to both components.
    pub amplitude: f64,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            slow_freq_hz: 0.04,
            center_freqs_hz: [1.0, 10.0],
            lengthscales_s: [1.0, 1.0],
            sample_rate_hz: 200.0,
            duration_s: 100.0,
            noise_var: 25.0,
            amplitude: 10.0,
        }
    }
}

impl SimSpec {
    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    pub fn delta(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    /// Envelope of component j at 1-based sample position k (fractional
    /// positions are allowed, for window centers).
    pub fn envelope(&self, j: usize, k: f64) -> f64 {
        let k_total = self.n_samples() as f64;
        match j {
            0 => self.amplitude * (k_total - k) / k_total,
            1 => {
                let c = (2.0 * PI * self.slow_freq_hz * k * self.delta()).cos();
                self.amplitude * c.powi(4)
            }
            _ => panic!("component index out of range"),
        }
    }

    /// True model parameters (unit power enters through the envelopes).
    pub fn true_params(&self) -> ModelParams {
        let delta = self.delta();
        let freqs = self
            .center_freqs_hz
            .iter()
            .map(|f| 2.0 * PI * f * delta)
            .collect();
        ModelParams::new(
            delta,
            Lambda::Value(0.0),
            self.noise_var,
            self.lengthscales_s.to_vec(),
            freqs,
            self.lengthscales_s.iter().copied().fold(1.0, f64::max) * 4.0,
        )
        .expect("generating parameters are valid")
    }
}

/// One realization: observations, ground-truth modulated components and the
/// recipe that produced them.
#[derive(Debug, Clone)]
pub struct SimulationBundle {
    pub observations: Vec<f64>,
    /// K x 2 matrix of envelope-scaled component real parts.
    pub true_components: Array2<f64>,
    pub spec: SimSpec,
    pub seed: u64,
}

impl SimulationBundle {
    /// Effective per-window powers: squared envelopes at window centers,
    /// one row per component.
    pub fn true_window_vars(&self, window_len: usize) -> Result<Array2<f64>> {
        let k_total = self.observations.len();
        if window_len == 0 || k_total % window_len != 0 {
            return Err(PlsoError::LengthNotDivisible {
                len: k_total,
                window_len,
            });
        }
        let m_windows = k_total / window_len;
        let mut vars = Array2::zeros((2, m_windows));
        for m in 0..m_windows {
            let center = (m * window_len) as f64 + 0.5 * (window_len as f64 + 1.0);
            for j in 0..2 {
                vars[[j, m]] = self.spec.envelope(j, center).powi(2);
            }
        }
        Ok(vars)
    }
}

/// Draws one realization of the two-component benchmark process.
pub fn simulate_modulated_pair(spec: &SimSpec, seed: u64) -> SimulationBundle {
    let k_total = spec.n_samples();
    let delta = spec.delta();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise_std = spec.noise_var.sqrt();

    let mut rot = Vec::with_capacity(2);
    let mut inn_std = Vec::with_capacity(2);
    for j in 0..2 {
        let rho = (-delta / spec.lengthscales_s[j]).exp();
        let omega = 2.0 * PI * spec.center_freqs_hz[j] * delta;
        rot.push(rotation_matrix(omega) * rho);
        inn_std.push((1.0 - rho * rho).sqrt());
    }

    let mut z = [nalgebra::Vector2::zeros(), nalgebra::Vector2::zeros()];
    let mut observations = Vec::with_capacity(k_total);
    let mut true_components = Array2::zeros((k_total, 2));
    for k0 in 0..k_total {
        for j in 0..2 {
            let e1: f64 = rng.sample(StandardNormal);
            let e2: f64 = rng.sample(StandardNormal);
            if k0 == 0 {
                z[j] = nalgebra::Vector2::new(e1, e2);
            } else {
                z[j] = rot[j] * z[j] + nalgebra::Vector2::new(e1, e2) * inn_std[j];
            }
        }
        let k_pos = (k0 + 1) as f64;
        let mut y: f64 = rng.sample::<f64, _>(StandardNormal) * noise_std;
        for j in 0..2 {
            let c = spec.envelope(j, k_pos) * z[j].x;
            true_components[[k0, j]] = c;
            y += c;
        }
        observations.push(y);
    }

    SimulationBundle {
        observations,
        true_components,
        spec: spec.clone(),
        seed,
    }
}

/// Mean absolute discontinuity of a trajectory across window boundaries:
/// (1/(M-1)) sum over interior boundaries of |first of next - last of prev|.
pub fn jump_metric(traj: &[f64], window_len: usize) -> Result<f64> {
    if window_len == 0 || traj.is_empty() || traj.len() % window_len != 0 {
        return Err(PlsoError::LengthNotDivisible {
            len: traj.len(),
            window_len,
        });
    }
    let m_windows = traj.len() / window_len;
    if m_windows < 2 {
        return Err(PlsoError::InvalidParameter(
            "jump metric needs at least two windows".into(),
        ));
    }
    let mut acc = 0.0;
    for m in 1..m_windows {
        acc += (traj[m * window_len] - traj[m * window_len - 1]).abs();
    }
    Ok(acc / (m_windows - 1) as f64)
}

/// Mean squared error between an estimate and the ground truth.
pub fn mse_metric(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(PlsoError::DimensionMismatch(format!(
            "estimate has {} samples, truth has {}",
            estimate.len(),
            truth.len()
        )));
    }
    let k = estimate.len() as f64;
    Ok(estimate
        .iter()
        .zip(truth.iter())
        .map(|(e, t)| (e - t) * (e - t))
        .sum::<f64>()
        / k)
}

/// Itakura-Saito divergence between two spectrograms, averaged per cell:
/// mean over (m, n) of true/est - log(true/est) - 1. Nonnegative, zero only
/// for identical inputs.
pub fn is_divergence(true_spec: &Array2<f64>, est_spec: &Array2<f64>) -> Result<f64> {
    if true_spec.dim() != est_spec.dim() {
        return Err(PlsoError::DimensionMismatch(format!(
            "spectrogram shapes {:?} vs {:?}",
            true_spec.dim(),
            est_spec.dim()
        )));
    }
    let mut acc = 0.0;
    for (t, e) in true_spec.iter().zip(est_spec.iter()) {
        if !(*t > 0.0 && *e > 0.0) {
            return Err(PlsoError::InvalidParameter(
                "spectrogram entries must be strictly positive".into(),
            ));
        }
        let r = t / e;
        acc += r - r.ln() - 1.0;
    }
    Ok(acc / true_spec.len() as f64)
}

/// Smoothness regimes compared by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaMode {
    Zero,
    CrossValidated,
    Stationary,
}

impl LambdaMode {
    pub fn label(&self) -> &'static str {
        match self {
            LambdaMode::Zero => "zero",
            LambdaMode::CrossValidated => "cv",
            LambdaMode::Stationary => "stationary",
        }
    }
}

/// Metrics of one fitted model against the ground truth.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    /// Per-component boundary jump of the smoothed trajectory.
    pub jump: Vec<f64>,
    /// Per-component mean squared error.
    pub mse: Vec<f64>,
    /// Signal-spectrogram Itakura-Saito divergence.
    pub is_div: f64,
    pub runtime_seconds: f64,
}

/// One row of the benchmark table.
#[derive(Debug, Clone)]
pub struct BenchmarkRow {
    pub mode: LambdaMode,
    /// Weights picked by cross-validation, one per realization.
    pub chosen_lambdas: Vec<Lambda>,
    pub metrics: MetricsReport,
}

/// Averaged benchmark results.
#[derive(Debug, Clone)]
pub struct BenchmarkReport {
    pub seeds: Vec<u64>,
    pub window_len: usize,
    /// Ground-truth boundary jump per component, averaged over seeds.
    pub truth_jump: Vec<f64>,
    pub rows: Vec<BenchmarkRow>,
}

/// Signal-only spectrogram (no observation-noise floor) of per-window powers
/// under the given shapes: rows are windows, columns the DFT grid.
fn signal_spectrogram(params: &ModelParams, powers: &Array2<f64>, window_len: usize) -> Array2<f64> {
    let m_windows = powers.ncols();
    let mut out = Array2::zeros((m_windows, window_len));
    for j in 0..params.n_components() {
        for i in 0..window_len {
            let w = 2.0 * PI * i as f64 / window_len as f64;
            let shape = 0.5 * (spectral_lobe(params, j, 1.0, w) + spectral_lobe(params, j, 1.0, -w));
            for m in 0..m_windows {
                out[[m, i]] += powers[[j, m]] * shape;
            }
        }
    }
    out
}

/// Pairs fitted components with the true ones by nearest center frequency.
fn match_components(fitted: &ModelParams, truth: &ModelParams) -> Vec<usize> {
    let direct: f64 = (0..2)
        .map(|j| (fitted.center_freqs[j] - truth.center_freqs[j]).abs())
        .sum();
    let swapped: f64 = (0..2)
        .map(|j| (fitted.center_freqs[1 - j] - truth.center_freqs[j]).abs())
        .sum();
    if direct <= swapped {
        vec![0, 1]
    } else {
        vec![1, 0]
    }
}

/// Smooths each window in isolation with the same fitted parameters and
/// concatenates the means. This is the reference baseline that reintroduces
/// boundary discontinuities the joint smoother avoids.
pub fn windowed_independent_smooth(
    observations: &[f64],
    params: &ModelParams,
    psi: &LogVarianceField,
) -> Result<Vec<Vec<f64>>> {
    let n = psi.window_len();
    let m_windows = psi.n_windows();
    if observations.len() != psi.n_samples() {
        return Err(PlsoError::DimensionMismatch(format!(
            "{} observations but the field covers {} samples",
            observations.len(),
            psi.n_samples()
        )));
    }
    let n_comp = params.n_components();
    let mut out = vec![Vec::with_capacity(observations.len()); n_comp];
    for m in 0..m_windows {
        let col = psi
            .values()
            .column(m)
            .insert_axis(ndarray::Axis(1))
            .to_owned();
        let window_field = LogVarianceField::new(col, n)?;
        let post = kalman_smooth(&observations[m * n..(m + 1) * n], params, &window_field)?;
        for (j, traj) in out.iter_mut().enumerate() {
            traj.extend(reconstruct_component(&post, j).mean);
        }
    }
    Ok(out)
}

/// Per-seed fit and metrics for one smoothness mode.
fn evaluate_mode(
    bundle: &SimulationBundle,
    window_len: usize,
    mode: LambdaMode,
    cfg: &FitConfig,
) -> Result<(MetricsReport, Option<Lambda>)> {
    let start = Instant::now();
    let delta = bundle.spec.delta();
    let obs = &bundle.observations;
    let (lambda, chosen) = match mode {
        LambdaMode::Zero => (Lambda::Value(0.0), None),
        LambdaMode::Stationary => (Lambda::Stationary, None),
        LambdaMode::CrossValidated => {
            let sel = cross_validate_lambda(obs, delta, window_len, 2, &default_lambda_grid(), cfg)?;
            (sel.chosen, Some(sel.chosen))
        }
    };
    let fit = block_coordinate_fit(obs, delta, window_len, 2, lambda, cfg)?;
    let post = kalman_smooth(obs, &fit.params, &fit.psi)?;

    let truth_params = bundle.spec.true_params();
    let perm = match_components(&fit.params, &truth_params);
    let mut jump = Vec::with_capacity(2);
    let mut mse = Vec::with_capacity(2);
    for j in 0..2 {
        let est = reconstruct_component(&post, perm[j]).mean;
        let truth: Vec<f64> = bundle.true_components.column(j).to_vec();
        jump.push(jump_metric(&est, window_len)?);
        mse.push(mse_metric(&est, &truth)?);
    }

    let true_powers = bundle.true_window_vars(window_len)?;
    let est_powers = fit.psi.values().mapv(f64::exp);
    let true_spec = signal_spectrogram(&truth_params, &true_powers, window_len);
    let est_spec = signal_spectrogram(&fit.params, &est_powers, window_len);
    let is_div = is_divergence(&true_spec, &est_spec)?;

    Ok((
        MetricsReport {
            jump,
            mse,
            is_div,
            runtime_seconds: start.elapsed().as_secs_f64(),
        },
        chosen,
    ))
}

/// Simulates one realization per seed, fits every requested mode with
/// two-second-equivalent windows of `window_len` samples and averages the
/// metrics. Per-seed failures abort the run only for the affected mode.
pub fn run_benchmark(
    spec: &SimSpec,
    seeds: &[u64],
    window_len: usize,
    modes: &[LambdaMode],
    cfg: &FitConfig,
) -> Result<BenchmarkReport> {
    if seeds.is_empty() {
        return Err(PlsoError::InvalidParameter("at least one seed required".into()));
    }
    let bundles: Vec<SimulationBundle> = seeds
        .iter()
        .map(|&s| simulate_modulated_pair(spec, s))
        .collect();

    let mut truth_jump = vec![0.0; 2];
    for bundle in &bundles {
        for j in 0..2 {
            let truth: Vec<f64> = bundle.true_components.column(j).to_vec();
            truth_jump[j] += jump_metric(&truth, window_len)?;
        }
    }
    for v in truth_jump.iter_mut() {
        *v /= seeds.len() as f64;
    }

    let mut rows = Vec::with_capacity(modes.len());
    for &mode in modes {
        let mut jump = vec![0.0; 2];
        let mut mse = vec![0.0; 2];
        let mut is_div = 0.0;
        let mut runtime = 0.0;
        let mut chosen_lambdas = Vec::new();
        for bundle in &bundles {
            let (metrics, chosen) = evaluate_mode(bundle, window_len, mode, cfg)?;
            for j in 0..2 {
                jump[j] += metrics.jump[j];
                mse[j] += metrics.mse[j];
            }
            is_div += metrics.is_div;
            runtime += metrics.runtime_seconds;
            if let Some(l) = chosen {
                chosen_lambdas.push(l);
            }
        }
        let n = seeds.len() as f64;
        for j in 0..2 {
            jump[j] /= n;
            mse[j] /= n;
        }
        rows.push(BenchmarkRow {
            mode,
            chosen_lambdas,
            metrics: MetricsReport {
                jump,
                mse,
                is_div: is_div / n,
                runtime_seconds: runtime,
            },
        });
    }

    Ok(BenchmarkReport {
        seeds: seeds.to_vec(),
        window_len,
        truth_jump,
        rows,
    })
}
