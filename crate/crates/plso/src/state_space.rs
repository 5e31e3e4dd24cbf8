//! Sample-level inference: Kalman filtering and smoothing of the stacked
//! 2J-dimensional latent state, component reconstruction with credible
//! intervals, forward-filter backward-sampling and Monte Carlo phase
//! estimates.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::error::{PlsoError, Result};
use crate::model::{rotation_matrix, LogVarianceField, ModelParams};

/// Eigenvalues of a posterior covariance may dip this far below zero before
/// the matrix is rejected; anything in between is clamped to zero.
const PSD_TOLERANCE: f64 = 1e-9;

/// Smoothed posterior over the stacked latent state.
#[derive(Debug, Clone)]
pub struct PosteriorTrajectories {
    /// K x 2J smoothed means.
    pub means: Array2<f64>,
    /// Smoothed covariance per sample.
    pub covs: Vec<DMatrix<f64>>,
    /// Marginal log-likelihood of the observations, accumulated from the
    /// one-step prediction errors.
    pub loglik: f64,
}

/// One component's reconstruction with a symmetric 95% credible band.
#[derive(Debug, Clone)]
pub struct ComponentBand {
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Posterior trajectory draws: S x K x 2J.
#[derive(Debug, Clone)]
pub struct SampleEnsemble {
    pub samples: Array3<f64>,
    pub seed: u64,
}

impl SampleEnsemble {
    pub fn n_samples(&self) -> usize {
        self.samples.shape()[0]
    }

    pub fn n_steps(&self) -> usize {
        self.samples.shape()[1]
    }
}

/// Per-sample circular mean phase with empirical-quantile credible bounds,
/// all wrapped to (-pi, pi]. Where the ensemble's resultant length drops
/// below 0.1 the phase is unidentified: the flag is set and the bounds span
/// the full circle around the mean.
#[derive(Debug, Clone)]
pub struct PhaseEstimate {
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub degenerate: Vec<bool>,
    pub level: f64,
}

struct FilterPass {
    pred_means: Vec<DVector<f64>>,
    pred_covs: Vec<DMatrix<f64>>,
    filt_means: Vec<DVector<f64>>,
    filt_covs: Vec<DMatrix<f64>>,
    loglik: f64,
}

fn transition_matrix(params: &ModelParams) -> DMatrix<f64> {
    let dim = 2 * params.n_components();
    let mut a = DMatrix::zeros(dim, dim);
    for j in 0..params.n_components() {
        let block = rotation_matrix(params.center_freqs[j]) * params.decay(j);
        a.view_mut((2 * j, 2 * j), (2, 2)).copy_from(&block);
    }
    a
}

fn symmetrize(p: &mut DMatrix<f64>) {
    let pt = p.transpose();
    *p += pt;
    *p *= 0.5;
}

fn check_inputs(observations: &[f64], params: &ModelParams, psi: &LogVarianceField) -> Result<()> {
    if params.n_components() == 0 {
        return Err(PlsoError::InvalidParameter("state-space inference needs at least one component".into()));
    }
    if psi.n_components() != params.n_components() {
        return Err(PlsoError::DimensionMismatch(format!(
            "field has {} components, params have {}",
            psi.n_components(),
            params.n_components()
        )));
    }
    if observations.len() != psi.n_samples() {
        return Err(PlsoError::DimensionMismatch(format!(
            "{} observations but the field covers {} samples",
            observations.len(),
            psi.n_samples()
        )));
    }
    if observations.iter().any(|y| !y.is_finite()) {
        return Err(PlsoError::Numerical("observations contain non-finite values".into()));
    }
    Ok(())
}

fn run_filter(observations: &[f64], params: &ModelParams, psi: &LogVarianceField) -> Result<FilterPass> {
    let n_comp = params.n_components();
    let dim = 2 * n_comp;
    let k_total = observations.len();
    let a = transition_matrix(params);
    let decays: Vec<f64> = (0..n_comp).map(|j| params.decay(j)).collect();

    let mut pred_means = Vec::with_capacity(k_total);
    let mut pred_covs = Vec::with_capacity(k_total);
    let mut filt_means = Vec::with_capacity(k_total);
    let mut filt_covs = Vec::with_capacity(k_total);
    let mut loglik = 0.0;

    let mut mean = DVector::zeros(dim);
    let mut cov = DMatrix::zeros(dim, dim);
    for j in 0..n_comp {
        let v = psi.variance(j, 0);
        cov[(2 * j, 2 * j)] = v;
        cov[(2 * j + 1, 2 * j + 1)] = v;
    }

    for k in 0..k_total {
        if k > 0 {
            // Predict through the rotation; the state noise uses the window
            // that contains sample k.
            let m = psi.window_of_sample(k);
            mean = &a * mean;
            cov = &a * cov * a.transpose();
            for j in 0..n_comp {
                let q = psi.variance(j, m) * (1.0 - decays[j] * decays[j]);
                cov[(2 * j, 2 * j)] += q;
                cov[(2 * j + 1, 2 * j + 1)] += q;
            }
            symmetrize(&mut cov);
        }
        pred_means.push(mean.clone());
        pred_covs.push(cov.clone());

        // Observation y = H z + noise with H = (1, 0, 1, 0, ...): the
        // innovation variance is a scalar.
        let mut hz = 0.0;
        let mut ph = DVector::zeros(dim);
        for j in 0..n_comp {
            hz += mean[2 * j];
        }
        for r in 0..dim {
            let mut acc = 0.0;
            for j in 0..n_comp {
                acc += cov[(r, 2 * j)];
            }
            ph[r] = acc;
        }
        let mut s = params.obs_noise_var;
        for j in 0..n_comp {
            s += ph[2 * j];
        }
        if !(s.is_finite() && s > 0.0) {
            return Err(PlsoError::Numerical(format!(
                "innovation variance degenerate at sample {k}: {s}"
            )));
        }
        let innovation = observations[k] - hz;
        loglik += -0.5 * ((2.0 * PI * s).ln() + innovation * innovation / s);

        let gain = &ph / s;
        mean += &gain * innovation;
        // Joseph update, exploiting that K H P = gain * ph^T.
        let mut updated = cov.clone();
        updated -= &gain * ph.transpose();
        let uh = {
            let mut v = DVector::zeros(dim);
            for r in 0..dim {
                let mut acc = 0.0;
                for j in 0..n_comp {
                    acc += updated[(r, 2 * j)];
                }
                v[r] = acc;
            }
            v
        };
        updated -= &uh * gain.transpose();
        updated += &gain * gain.transpose() * params.obs_noise_var;
        symmetrize(&mut updated);
        cov = updated;

        filt_means.push(mean.clone());
        filt_covs.push(cov.clone());
    }

    Ok(FilterPass {
        pred_means,
        pred_covs,
        filt_means,
        filt_covs,
        loglik,
    })
}

/// Clamps small negative eigenvalues to zero; errors when the matrix is
/// indefinite beyond tolerance.
fn clamp_psd(p: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(p.clone());
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eig >= 0.0 {
        return Ok(p);
    }
    if min_eig < -PSD_TOLERANCE {
        return Err(PlsoError::Numerical(format!(
            "{what} is indefinite: smallest eigenvalue {min_eig}"
        )));
    }
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let mut rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    symmetrize(&mut rebuilt);
    Ok(rebuilt)
}

/// Runs the Kalman filter and the backward smoothing recursion, returning
/// smoothed means, covariances and the innovation-form marginal
/// log-likelihood.
pub fn kalman_smooth(
    observations: &[f64],
    params: &ModelParams,
    psi: &LogVarianceField,
) -> Result<PosteriorTrajectories> {
    check_inputs(observations, params, psi)?;
    let pass = run_filter(observations, params, psi)?;
    let k_total = observations.len();
    let dim = 2 * params.n_components();
    let a = transition_matrix(params);

    let mut smoothed_means = vec![DVector::zeros(dim); k_total];
    let mut smoothed_covs = vec![DMatrix::zeros(dim, dim); k_total];
    smoothed_means[k_total - 1] = pass.filt_means[k_total - 1].clone();
    smoothed_covs[k_total - 1] = clamp_psd(pass.filt_covs[k_total - 1].clone(), "filtered covariance")?;

    for k in (0..k_total - 1).rev() {
        let chol = Cholesky::new(pass.pred_covs[k + 1].clone()).ok_or_else(|| {
            PlsoError::Numerical(format!("predicted covariance at sample {} is singular", k + 1))
        })?;
        // C = P_filt A' P_pred^{-1}, applied through the factorization.
        let gain = chol.solve(&(&a * &pass.filt_covs[k])).transpose();
        let mean_gap = &smoothed_means[k + 1] - &pass.pred_means[k + 1];
        smoothed_means[k] = &pass.filt_means[k] + &gain * mean_gap;
        let cov_gap = &smoothed_covs[k + 1] - &pass.pred_covs[k + 1];
        let mut cov = &pass.filt_covs[k] + &gain * cov_gap * gain.transpose();
        symmetrize(&mut cov);
        smoothed_covs[k] = clamp_psd(cov, "smoothed covariance")?;
    }

    let mut means = Array2::zeros((k_total, dim));
    for (k, m) in smoothed_means.iter().enumerate() {
        for d in 0..dim {
            means[[k, d]] = m[d];
        }
    }
    Ok(PosteriorTrajectories {
        means,
        covs: smoothed_covs,
        loglik: pass.loglik,
    })
}

/// Mean and 95% credible band of the real part of component j.
pub fn reconstruct_component(post: &PosteriorTrajectories, component: usize) -> ComponentBand {
    let idx = 2 * component;
    let k_total = post.means.nrows();
    let mut mean = Vec::with_capacity(k_total);
    let mut lower = Vec::with_capacity(k_total);
    let mut upper = Vec::with_capacity(k_total);
    for k in 0..k_total {
        let m = post.means[[k, idx]];
        let half = 1.96 * post.covs[k][(idx, idx)].max(0.0).sqrt();
        mean.push(m);
        lower.push(m - half);
        upper.push(m + half);
    }
    ComponentBand { mean, lower, upper }
}

/// Factor of a covariance for sampling: a Cholesky factor when the matrix is
/// positive definite, otherwise an eigenvalue square root with small
/// negatives clamped.
fn sampling_factor(p: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if let Some(chol) = Cholesky::new(p.clone()) {
        return Ok(chol.l());
    }
    let eig = SymmetricEigen::new(p.clone());
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eig < -PSD_TOLERANCE {
        return Err(PlsoError::Numerical(format!(
            "{what} is indefinite: smallest eigenvalue {min_eig}"
        )));
    }
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        *v = v.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&vals))
}

/// Draws S posterior trajectories by forward filtering and backward
/// sampling. The filter and the per-step conditional factors are computed
/// once; each draw then runs an O(K) backward pass on its own seeded stream,
/// so draws are reproducible and independent across the sample index.
pub fn ffbs_sample(
    observations: &[f64],
    params: &ModelParams,
    psi: &LogVarianceField,
    n_draws: usize,
    seed: u64,
) -> Result<SampleEnsemble> {
    if n_draws == 0 {
        return Err(PlsoError::InvalidParameter("at least one draw required".into()));
    }
    check_inputs(observations, params, psi)?;
    let pass = run_filter(observations, params, psi)?;
    let k_total = observations.len();
    let dim = 2 * params.n_components();
    let a = transition_matrix(params);

    // Backward-conditional pieces shared by every draw:
    // mu_k = z_filt + C (z_{k+1} - A z_filt), cov = P_filt - C P_pred C'.
    let mut gains = Vec::with_capacity(k_total - 1);
    let mut factors = Vec::with_capacity(k_total - 1);
    let mut centers = Vec::with_capacity(k_total - 1);
    for k in 0..k_total - 1 {
        let chol = Cholesky::new(pass.pred_covs[k + 1].clone()).ok_or_else(|| {
            PlsoError::Numerical(format!("predicted covariance at sample {} is singular", k + 1))
        })?;
        let gain = chol.solve(&(&a * &pass.filt_covs[k])).transpose();
        let mut cond = &pass.filt_covs[k] - &gain * &pass.pred_covs[k + 1] * gain.transpose();
        symmetrize(&mut cond);
        factors.push(sampling_factor(&cond, "backward conditional covariance")?);
        centers.push(&a * &pass.filt_means[k]);
        gains.push(gain);
    }
    let last_factor = sampling_factor(&pass.filt_covs[k_total - 1], "terminal filtered covariance")?;

    let mut samples = Array3::zeros((n_draws, k_total, dim));
    let mut noise = DVector::zeros(dim);
    for s in 0..n_draws {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s as u64);
        for d in 0..dim {
            noise[d] = rng.sample(StandardNormal);
        }
        let mut z = &pass.filt_means[k_total - 1] + &last_factor * &noise;
        for d in 0..dim {
            samples[[s, k_total - 1, d]] = z[d];
        }
        for k in (0..k_total - 1).rev() {
            for d in 0..dim {
                noise[d] = rng.sample(StandardNormal);
            }
            let mu = &pass.filt_means[k] + &gains[k] * (&z - &centers[k]);
            z = mu + &factors[k] * &noise;
            for d in 0..dim {
                samples[[s, k, d]] = z[d];
            }
        }
    }

    Ok(SampleEnsemble { samples, seed })
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Monte Carlo phase of component j: per sample index the circular mean of
/// atan2(Im, Re) over draws, with credible bounds from empirical quantiles of
/// the wrapped deviations re-centered on the mean.
pub fn phase_estimate(
    ens: &SampleEnsemble,
    component: usize,
    level: f64,
    min_draws: usize,
) -> Result<PhaseEstimate> {
    let n_draws = ens.n_samples();
    if n_draws < min_draws {
        return Err(PlsoError::InvalidParameter(format!(
            "{n_draws} draws but at least {min_draws} required for stable quantiles"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(PlsoError::InvalidParameter(format!(
            "coverage level must lie in (0, 1), got {level}"
        )));
    }
    let k_total = ens.n_steps();
    let re = 2 * component;
    let im = re + 1;
    let q_lo = (1.0 - level) / 2.0;
    let q_hi = (1.0 + level) / 2.0;

    let mut mean = Vec::with_capacity(k_total);
    let mut lower = Vec::with_capacity(k_total);
    let mut upper = Vec::with_capacity(k_total);
    let mut degenerate = Vec::with_capacity(k_total);
    let mut phases = vec![0.0; n_draws];
    for k in 0..k_total {
        let mut sum_sin = 0.0;
        let mut sum_cos = 0.0;
        for (s, slot) in phases.iter_mut().enumerate() {
            let phi = ens.samples[[s, k, im]].atan2(ens.samples[[s, k, re]]);
            *slot = phi;
            sum_sin += phi.sin();
            sum_cos += phi.cos();
        }
        let circ_mean = wrap_angle(sum_sin.atan2(sum_cos));
        let resultant = (sum_sin * sum_sin + sum_cos * sum_cos).sqrt() / n_draws as f64;
        mean.push(circ_mean);
        if resultant < 0.1 {
            degenerate.push(true);
            lower.push(wrap_angle(circ_mean - PI));
            upper.push(wrap_angle(circ_mean + PI));
            continue;
        }
        degenerate.push(false);
        let mut deviations: Vec<f64> = phases.iter().map(|&p| wrap_angle(p - circ_mean)).collect();
        deviations.sort_by(|a, b| a.total_cmp(b));
        lower.push(wrap_angle(circ_mean + quantile_sorted(&deviations, q_lo)));
        upper.push(wrap_angle(circ_mean + quantile_sorted(&deviations, q_hi)));
    }

    Ok(PhaseEstimate {
        mean,
        lower,
        upper,
        degenerate,
        level,
    })
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Lambda;
    use approx::assert_abs_diff_eq;

    fn small_model() -> (ModelParams, LogVarianceField) {
        let params = ModelParams::new(0.01, Lambda::Value(0.0), 0.4, vec![0.08], vec![0.9], 1.0).unwrap();
        let psi = LogVarianceField::constant(1, 3, 8, 0.3).unwrap();
        (params, psi)
    }

    #[test]
    fn zero_observations_give_zero_means() {
        let (params, psi) = small_model();
        let obs = vec![0.0; psi.n_samples()];
        let post = kalman_smooth(&obs, &params, &psi).unwrap();
        for v in post.means.iter() {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn filtered_and_smoothed_agree_at_the_end() {
        let (params, psi) = small_model();
        let obs: Vec<f64> = (0..psi.n_samples()).map(|k| (k as f64 * 0.4).sin()).collect();
        let pass = run_filter(&obs, &params, &psi).unwrap();
        let post = kalman_smooth(&obs, &params, &psi).unwrap();
        let k_last = obs.len() - 1;
        for d in 0..2 {
            assert_abs_diff_eq!(post.means[[k_last, d]], pass.filt_means[k_last][d], epsilon = 1e-12);
        }
    }

    #[test]
    fn smoothed_covariance_never_exceeds_filtered() {
        let (params, psi) = small_model();
        let obs: Vec<f64> = (0..psi.n_samples()).map(|k| (k as f64 * 1.3).cos()).collect();
        let pass = run_filter(&obs, &params, &psi).unwrap();
        let post = kalman_smooth(&obs, &params, &psi).unwrap();
        for k in 0..obs.len() {
            let diff = &pass.filt_covs[k] - &post.covs[k];
            let eig = SymmetricEigen::new(diff);
            let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(min_eig >= -1e-9, "sample {k}: min eigenvalue {min_eig}");
        }
    }

    #[test]
    fn strong_component_absorbs_the_data() {
        // sigma2 / sigma_nu^2 = 1e6: the smoothed real part tracks the
        // observations almost exactly.
        let params = ModelParams::new(0.01, Lambda::Value(0.0), 1e-6, vec![0.5], vec![0.4], 10.0).unwrap();
        let psi = LogVarianceField::constant(1, 2, 32, 0.0).unwrap();
        let obs: Vec<f64> = (0..64).map(|k| (0.4 * k as f64).cos()).collect();
        let post = kalman_smooth(&obs, &params, &psi).unwrap();
        let band = reconstruct_component(&post, 0);
        let max_resid = obs
            .iter()
            .zip(band.mean.iter())
            .map(|(y, m)| (y - m).abs())
            .fold(0.0f64, f64::max);
        assert!(max_resid < 2e-3, "max residual {max_resid}");
    }

    #[test]
    fn band_is_symmetric_with_exact_width() {
        let (params, psi) = small_model();
        let obs: Vec<f64> = (0..psi.n_samples()).map(|k| (k as f64 * 0.7).sin()).collect();
        let post = kalman_smooth(&obs, &params, &psi).unwrap();
        let band = reconstruct_component(&post, 0);
        for k in 0..obs.len() {
            let sd = post.covs[k][(0, 0)].sqrt();
            assert_abs_diff_eq!(band.upper[k] - band.mean[k], 1.96 * sd, epsilon = 1e-12);
            assert_abs_diff_eq!(band.mean[k] - band.lower[k], 1.96 * sd, epsilon = 1e-12);
        }
    }

    #[test]
    fn ffbs_is_bit_reproducible() {
        let (params, psi) = small_model();
        let obs: Vec<f64> = (0..psi.n_samples()).map(|k| (k as f64 * 0.7).sin()).collect();
        let a = ffbs_sample(&obs, &params, &psi, 3, 42).unwrap();
        let b = ffbs_sample(&obs, &params, &psi, 3, 42).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = ffbs_sample(&obs, &params, &psi, 3, 43).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn ffbs_prefix_is_stable_in_draw_count() {
        // Draw s does not depend on how many draws were requested.
        let (params, psi) = small_model();
        let obs: Vec<f64> = (0..psi.n_samples()).map(|k| (k as f64 * 0.2).cos()).collect();
        let few = ffbs_sample(&obs, &params, &psi, 2, 9).unwrap();
        let many = ffbs_sample(&obs, &params, &psi, 5, 9).unwrap();
        for s in 0..2 {
            for k in 0..obs.len() {
                for d in 0..2 {
                    assert_eq!(few.samples[[s, k, d]], many.samples[[s, k, d]]);
                }
            }
        }
    }

    #[test]
    fn phase_of_identical_draws_has_zero_width() {
        let mut samples = Array3::zeros((60, 4, 2));
        for s in 0..60 {
            for k in 0..4 {
                let phi = 0.3 + 0.5 * k as f64;
                samples[[s, k, 0]] = phi.cos();
                samples[[s, k, 1]] = phi.sin();
            }
        }
        let ens = SampleEnsemble { samples, seed: 0 };
        let est = phase_estimate(&ens, 0, 0.95, 50).unwrap();
        for k in 0..4 {
            let expected = wrap_angle(0.3 + 0.5 * k as f64);
            assert_abs_diff_eq!(est.mean[k], expected, epsilon = 1e-12);
            assert_abs_diff_eq!(est.lower[k], expected, epsilon = 1e-12);
            assert_abs_diff_eq!(est.upper[k], expected, epsilon = 1e-12);
            assert!(!est.degenerate[k]);
        }
    }

    #[test]
    fn uniform_circle_is_flagged_degenerate() {
        let s_count = 64;
        let mut samples = Array3::zeros((s_count, 2, 2));
        for s in 0..s_count {
            let phi = 2.0 * PI * s as f64 / s_count as f64;
            for k in 0..2 {
                samples[[s, k, 0]] = phi.cos();
                samples[[s, k, 1]] = phi.sin();
            }
        }
        let ens = SampleEnsemble { samples, seed: 0 };
        let est = phase_estimate(&ens, 0, 0.95, 50).unwrap();
        assert!(est.degenerate.iter().all(|&d| d));
    }

    #[test]
    fn phase_advances_by_omega_for_pure_rotation() {
        // A noiseless rotating state: phase advances by omega per sample.
        let omega = 0.37;
        let r = rotation_matrix(omega);
        let mut z = nalgebra::Vector2::new(1.0, 0.0);
        let k_total = 50;
        let mut samples = Array3::zeros((50, k_total, 2));
        let mut states = Vec::with_capacity(k_total);
        for _ in 0..k_total {
            states.push(z);
            z = r * z;
        }
        for s in 0..50 {
            for (k, st) in states.iter().enumerate() {
                samples[[s, k, 0]] = st.x;
                samples[[s, k, 1]] = st.y;
            }
        }
        let ens = SampleEnsemble { samples, seed: 0 };
        let est = phase_estimate(&ens, 0, 0.95, 50).unwrap();
        for k in 1..k_total {
            let advance = wrap_angle(est.mean[k] - est.mean[k - 1]);
            assert_abs_diff_eq!(advance, omega, epsilon = 1e-6);
        }
    }

    #[test]
    fn rejects_shape_mismatch_and_bad_draw_counts() {
        let (params, psi) = small_model();
        let obs = vec![0.0; psi.n_samples() - 1];
        assert!(kalman_smooth(&obs, &params, &psi).is_err());
        let obs = vec![0.0; psi.n_samples()];
        assert!(ffbs_sample(&obs, &params, &psi, 0, 1).is_err());
        let ens = ffbs_sample(&obs, &params, &psi, 3, 1).unwrap();
        assert!(phase_estimate(&ens, 0, 0.95, 50).is_err());
        assert!(phase_estimate(&ens, 0, 1.5, 1).is_err());
    }
}
