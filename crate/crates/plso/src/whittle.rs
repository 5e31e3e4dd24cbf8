//! Frequency-domain objective: per-window periodograms, the Whittle
//! log-likelihood of the window powers, its smoothness log-prior, analytic
//! gradients and a Lipschitz bound for the gradient.
//!
//! The periodogram is the squared DFT magnitude of each window divided by the
//! window length, so its entries estimate the model PSD at the same scale as
//! [`crate::model::psd`]; fitted powers are therefore in PSD units.

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{PlsoError, Result};
use crate::model::{component_spectrum, LogVarianceField, ModelParams};

/// Densities below this are treated as a diagnostic failure: with a positive
/// observation-noise floor no valid parameter set can reach it.
const GAMMA_FLOOR: f64 = 1e-300;

/// M x N matrix of per-window periodogram values on the zero-based DFT grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    values: Array2<f64>,
}

impl Periodogram {
    /// Wraps precomputed values, checking them for finiteness and sign.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        if values.ncols() < 2 {
            return Err(PlsoError::InvalidParameter(format!(
                "periodogram needs window length >= 2, got {}",
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(PlsoError::Numerical(
                "periodogram entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Periodogram { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_windows(&self) -> usize {
        self.values.nrows()
    }

    pub fn window_len(&self) -> usize {
        self.values.ncols()
    }

    /// Largest entry; the C_I constant of the Lipschitz bound.
    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, &b| a.max(b))
    }
}

/// Splits the record into non-overlapping windows of `window_len` samples
/// (no taper) and computes |DFT|^2 / N for each.
pub fn periodogram(observations: &[f64], window_len: usize) -> Result<Periodogram> {
    if window_len < 2 {
        return Err(PlsoError::InvalidParameter(format!(
            "window length must be at least 2, got {window_len}"
        )));
    }
    if observations.is_empty() || observations.len() % window_len != 0 {
        return Err(PlsoError::LengthNotDivisible {
            len: observations.len(),
            window_len,
        });
    }
    let n_windows = observations.len() / window_len;
    let fft = FftPlanner::new().plan_fft_forward(window_len);
    let mut values = Array2::zeros((n_windows, window_len));
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); window_len];
    for m in 0..n_windows {
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(observations[m * window_len + i], 0.0);
        }
        fft.process(&mut buf);
        for (i, c) in buf.iter().enumerate() {
            values[[m, i]] = c.norm_sqr() / window_len as f64;
        }
    }
    Periodogram::from_values(values)
}

/// Objective pieces at one point: the Whittle log-likelihood f, the
/// smoothness log-prior g, their sum and the gradient of f with respect to
/// the log powers.
#[derive(Debug, Clone)]
pub struct ObjectiveReport {
    pub log_lik: f64,
    pub log_prior: f64,
    pub total: f64,
    pub grad: Array2<f64>,
}

/// Unit-power spectral shapes alpha[j, n] on the window grid; the model PSD
/// of window m is obs_noise_var + sum_j exp(psi[j,m]) * alpha[j, n].
pub(crate) fn spectral_shapes(params: &ModelParams, window_len: usize) -> Array2<f64> {
    let n = window_len;
    let mut alpha = Array2::zeros((params.n_components(), n));
    for j in 0..params.n_components() {
        for i in 0..n {
            let w = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            alpha[[j, i]] = component_spectrum(params, j, 1.0, w);
        }
    }
    alpha
}

fn check_shapes(pg: &Periodogram, params: &ModelParams, psi: &LogVarianceField) -> Result<()> {
    if pg.window_len() != psi.window_len() {
        return Err(PlsoError::DimensionMismatch(format!(
            "periodogram window length {} vs field window length {}",
            pg.window_len(),
            psi.window_len()
        )));
    }
    if pg.n_windows() != psi.n_windows() {
        return Err(PlsoError::DimensionMismatch(format!(
            "periodogram has {} windows, field has {}",
            pg.n_windows(),
            psi.n_windows()
        )));
    }
    if psi.n_components() != params.n_components() {
        return Err(PlsoError::DimensionMismatch(format!(
            "field has {} components, params have {}",
            psi.n_components(),
            params.n_components()
        )));
    }
    Ok(())
}

pub(crate) fn loglik_with_shapes(
    pg: &Periodogram,
    params: &ModelParams,
    psi: &Array2<f64>,
    alpha: &Array2<f64>,
) -> Result<f64> {
    let (n_comp, n) = (alpha.nrows(), alpha.ncols());
    // Accumulate a subtotal per window so the joint value decomposes exactly
    // into the sum of per-window evaluations.
    let mut total = 0.0;
    for m in 0..pg.n_windows() {
        let powers: Vec<f64> = (0..n_comp).map(|j| psi[[j, m]].exp()).collect();
        let mut window_total = 0.0;
        for i in 0..n {
            let mut gamma = params.obs_noise_var;
            for j in 0..n_comp {
                gamma += powers[j] * alpha[[j, i]];
            }
            if !gamma.is_finite() || gamma < GAMMA_FLOOR {
                return Err(PlsoError::Numerical(format!(
                    "model PSD degenerate at window {m}, bin {i}: gamma = {gamma}"
                )));
            }
            window_total += gamma.ln() + pg.values()[[m, i]] / gamma;
        }
        total += -0.5 * window_total;
    }
    if !total.is_finite() {
        return Err(PlsoError::Numerical("Whittle log-likelihood is non-finite".into()));
    }
    Ok(total)
}

pub(crate) fn grad_with_shapes(
    pg: &Periodogram,
    params: &ModelParams,
    psi: &Array2<f64>,
    alpha: &Array2<f64>,
) -> Result<Array2<f64>> {
    let (n_comp, n) = (alpha.nrows(), alpha.ncols());
    let mut grad = Array2::zeros((n_comp, pg.n_windows()));
    for m in 0..pg.n_windows() {
        let powers: Vec<f64> = (0..n_comp).map(|j| psi[[j, m]].exp()).collect();
        for i in 0..n {
            let mut gamma = params.obs_noise_var;
            for j in 0..n_comp {
                gamma += powers[j] * alpha[[j, i]];
            }
            if !gamma.is_finite() || gamma < GAMMA_FLOOR {
                return Err(PlsoError::Numerical(format!(
                    "model PSD degenerate at window {m}, bin {i}: gamma = {gamma}"
                )));
            }
            let resid = (1.0 - pg.values()[[m, i]] / gamma) / gamma;
            for j in 0..n_comp {
                grad[[j, m]] -= 0.5 * alpha[[j, i]] * powers[j] * resid;
            }
        }
    }
    Ok(grad)
}

/// Whittle log-likelihood of the record given the window powers: the sum over
/// windows and grid frequencies of -(1/2) [log gamma + I / gamma], where gamma
/// is the model PSD (observation noise included).
pub fn whittle_loglik(pg: &Periodogram, params: &ModelParams, psi: &LogVarianceField) -> Result<f64> {
    check_shapes(pg, params, psi)?;
    let alpha = spectral_shapes(params, pg.window_len());
    loglik_with_shapes(pg, params, psi.values(), &alpha)
}

/// Log-prior from the random walk on log powers:
/// -(lambda/2) sum_j sum_{m>=2} (psi[j,m] - psi[j,m-1])^2.
pub fn log_prior(psi: &LogVarianceField, lambda: f64) -> f64 {
    let v = psi.values();
    let mut acc = 0.0;
    for j in 0..psi.n_components() {
        for m in 1..psi.n_windows() {
            let d = v[[j, m]] - v[[j, m - 1]];
            acc += d * d;
        }
    }
    -0.5 * lambda * acc
}

/// Gradient of `whittle_loglik` with respect to each log power.
pub fn grad_loglik(pg: &Periodogram, params: &ModelParams, psi: &LogVarianceField) -> Result<Array2<f64>> {
    check_shapes(pg, params, psi)?;
    let alpha = spectral_shapes(params, pg.window_len());
    grad_with_shapes(pg, params, psi.values(), &alpha)
}

/// Evaluates likelihood, prior and gradient together. With the stationary
/// flag the prior term is zero: rows are constant by construction there, so
/// the penalty vanishes exactly.
pub fn objective_report(pg: &Periodogram, params: &ModelParams, psi: &LogVarianceField) -> Result<ObjectiveReport> {
    let log_lik = whittle_loglik(pg, params, psi)?;
    let log_prior = match params.lambda.value() {
        Some(lambda) => log_prior(psi, lambda),
        None => 0.0,
    };
    Ok(ObjectiveReport {
        log_lik,
        log_prior,
        total: log_lik + log_prior,
        grad: grad_loglik(pg, params, psi)?,
    })
}

/// Upper bound on the Lipschitz constant of the likelihood gradient over the
/// box |psi| <= log_power_bound:
/// C = (J M N C_alpha C_psi / sigma_nu^2) (1 + C_I / sigma_nu^2).
pub fn lipschitz_bound(pg: &Periodogram, params: &ModelParams, log_power_bound: f64) -> f64 {
    let j = params.n_components() as f64;
    let m = pg.n_windows() as f64;
    let n = pg.window_len() as f64;
    let rho_max = (-params.delta / params.max_lengthscale).exp();
    let c_alpha = (1.0 + rho_max) / (1.0 - rho_max);
    let c_psi = log_power_bound.exp();
    let c_i = pg.max_value();
    let nv = params.obs_noise_var;
    (j * m * n * c_alpha * c_psi / nv) * (1.0 + c_i / nv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{psd, Lambda};
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;

    fn test_params(n_comp: usize) -> ModelParams {
        let ls = (0..n_comp).map(|j| 0.1 + 0.05 * j as f64).collect();
        let ws = (0..n_comp).map(|j| 0.3 + 0.5 * j as f64).collect();
        ModelParams::new(0.01, Lambda::Value(1.0), 0.8, ls, ws, 1.0).unwrap()
    }

    #[test]
    fn periodogram_dc_signal() {
        let n = 16;
        let c = 2.5;
        let obs = vec![c; n];
        let pg = periodogram(&obs, n).unwrap();
        assert_abs_diff_eq!(pg.values()[[0, 0]], n as f64 * c * c, epsilon = 1e-9);
        for i in 1..n {
            assert_abs_diff_eq!(pg.values()[[0, i]], 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn periodogram_grid_cosine_mass() {
        let n = 64;
        let bin = 5;
        let a = 1.7;
        let obs: Vec<f64> = (0..n)
            .map(|k| a * (2.0 * std::f64::consts::PI * bin as f64 * k as f64 / n as f64).cos())
            .collect();
        let pg = periodogram(&obs, n).unwrap();
        let expected = n as f64 * a * a / 4.0;
        assert_abs_diff_eq!(pg.values()[[0, bin]], expected, epsilon = 1e-9 * expected);
        assert_abs_diff_eq!(pg.values()[[0, n - bin]], expected, epsilon = 1e-9 * expected);
        let rest: f64 = (0..n)
            .filter(|&i| i != bin && i != n - bin)
            .map(|i| pg.values()[[0, i]])
            .sum();
        assert!(rest < 1e-9 * expected);
    }

    #[test]
    fn periodogram_parseval() {
        let n = 32;
        let obs: Vec<f64> = (0..3 * n).map(|k| ((k * k) as f64 * 0.37).sin()).collect();
        let pg = periodogram(&obs, n).unwrap();
        for m in 0..3 {
            let lhs: f64 = (0..n).map(|i| pg.values()[[m, i]]).sum();
            let rhs: f64 = obs[m * n..(m + 1) * n].iter().map(|y| y * y).sum();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-9 * rhs.abs());
        }
    }

    #[test]
    fn periodogram_rejects_ragged_record() {
        let obs = vec![0.0; 33];
        assert!(matches!(
            periodogram(&obs, 16),
            Err(PlsoError::LengthNotDivisible { len: 33, window_len: 16 })
        ));
    }

    #[test]
    fn loglik_at_perfect_fit() {
        // I == gamma pointwise: f = -(1/2) sum (log gamma + 1).
        let params = test_params(2);
        let psi = LogVarianceField::new(
            Array2::from_shape_vec((2, 3), vec![0.1, -0.4, 0.3, 0.0, 0.2, -0.1]).unwrap(),
            8,
        )
        .unwrap();
        let mut values = Array2::zeros((3, 8));
        let mut expected = 0.0;
        for m in 0..3 {
            let grid = psd(&params, &psi.window(m), 8).unwrap();
            for i in 0..8 {
                values[[m, i]] = grid.total[i];
                expected += grid.total[i].ln() + 1.0;
            }
        }
        let pg = Periodogram::from_values(values).unwrap();
        let f = whittle_loglik(&pg, &params, &psi).unwrap();
        assert_abs_diff_eq!(f, -0.5 * expected, epsilon = 1e-9 * expected.abs());
    }

    #[test]
    fn loglik_window_permutation_invariance() {
        let params = test_params(1);
        let psi_vals = Array2::from_shape_vec((1, 4), vec![0.3, -0.2, 0.5, 0.0]).unwrap();
        let pg_vals = Array2::from_shape_vec(
            (4, 4),
            (0..16).map(|i| 0.5 + (i as f64 * 0.13).sin().abs()).collect(),
        )
        .unwrap();
        let perm = [2usize, 0, 3, 1];
        let mut psi_perm = psi_vals.clone();
        let mut pg_perm = pg_vals.clone();
        for (to, &from) in perm.iter().enumerate() {
            psi_perm[[0, to]] = psi_vals[[0, from]];
            for i in 0..4 {
                pg_perm[[to, i]] = pg_vals[[from, i]];
            }
        }
        let f1 = whittle_loglik(
            &Periodogram::from_values(pg_vals).unwrap(),
            &params,
            &LogVarianceField::new(psi_vals, 4).unwrap(),
        )
        .unwrap();
        let f2 = whittle_loglik(
            &Periodogram::from_values(pg_perm).unwrap(),
            &params,
            &LogVarianceField::new(psi_perm, 4).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(f1, f2, epsilon = 1e-12 * f1.abs());
    }

    #[test]
    fn loglik_decomposes_over_windows() {
        let params = test_params(2);
        let psi_vals = Array2::from_shape_vec((2, 3), vec![0.1, -0.4, 0.3, 0.0, 0.2, -0.1]).unwrap();
        let pg_vals = Array2::from_shape_vec(
            (3, 8),
            (0..24).map(|i| 0.2 + (i as f64 * 0.7).cos().abs()).collect(),
        )
        .unwrap();
        let joint = whittle_loglik(
            &Periodogram::from_values(pg_vals.clone()).unwrap(),
            &params,
            &LogVarianceField::new(psi_vals.clone(), 8).unwrap(),
        )
        .unwrap();
        let mut per_window = 0.0;
        for m in 0..3 {
            let row = pg_vals.row(m).insert_axis(ndarray::Axis(0)).to_owned();
            let col = psi_vals.column(m).insert_axis(ndarray::Axis(1)).to_owned();
            per_window += whittle_loglik(
                &Periodogram::from_values(row).unwrap(),
                &params,
                &LogVarianceField::new(col, 8).unwrap(),
            )
            .unwrap();
        }
        assert_eq!(joint, per_window);
    }

    #[test]
    fn log_prior_cases() {
        // Constant rows -> 0 for any lambda.
        let flat = LogVarianceField::constant(2, 5, 4, 0.7).unwrap();
        assert_eq!(log_prior(&flat, 3.0), 0.0);
        // lambda = 0 -> 0 for any field.
        let psi = LogVarianceField::new(
            Array2::from_shape_vec((1, 3), vec![0.0, 1.0, 3.0]).unwrap(),
            4,
        )
        .unwrap();
        assert_eq!(log_prior(&psi, 0.0), 0.0);
        // Hand evaluation: J=1, M=3, psi = (0, 1, 3), lambda = 2 -> -5.
        assert_abs_diff_eq!(log_prior(&psi, 2.0), -5.0, epsilon = 1e-15);
        // Negative semidefinite quadratic: zero iff each row constant.
        assert!(log_prior(&psi, 1.0) < 0.0);
    }

    #[test]
    fn grad_zero_at_exact_fit_single_bin_balance() {
        // I == gamma pointwise makes the residual term vanish identically.
        let params = test_params(1);
        let psi = LogVarianceField::constant(1, 2, 8, 0.4).unwrap();
        let mut values = Array2::zeros((2, 8));
        for m in 0..2 {
            let grid = psd(&params, &psi.window(m), 8).unwrap();
            for i in 0..8 {
                values[[m, i]] = grid.total[i];
            }
        }
        let pg = Periodogram::from_values(values).unwrap();
        let g = grad_loglik(&pg, &params, &psi).unwrap();
        for &v in g.iter() {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn lipschitz_bound_monotonicity() {
        let params = test_params(2);
        let small = Periodogram::from_values(Array2::from_elem((3, 8), 1.0)).unwrap();
        let large = Periodogram::from_values(Array2::from_elem((3, 8), 10.0)).unwrap();
        let wide = Periodogram::from_values(Array2::from_elem((3, 16), 1.0)).unwrap();
        let tall = Periodogram::from_values(Array2::from_elem((6, 8), 1.0)).unwrap();
        let c = lipschitz_bound(&small, &params, 3.0);
        assert!(lipschitz_bound(&large, &params, 3.0) >= c);
        assert!(lipschitz_bound(&wide, &params, 3.0) >= c);
        assert!(lipschitz_bound(&tall, &params, 3.0) >= c);
        assert!(lipschitz_bound(&small, &params, 4.0) >= c);
    }

    #[test]
    fn lipschitz_bound_noise_scaling() {
        // When C_I >> sigma_nu^2, doubling the noise variance shrinks C by
        // more than a factor of two.
        let mut params = test_params(1);
        let pg = Periodogram::from_values(Array2::from_elem((2, 8), 1e4)).unwrap();
        let c1 = lipschitz_bound(&pg, &params, 3.0);
        params.obs_noise_var *= 2.0;
        let c2 = lipschitz_bound(&pg, &params, 3.0);
        assert!(c2 < c1 / 2.0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let params = test_params(1);
        let psi = LogVarianceField::constant(1, 3, 8, 0.0).unwrap();
        let pg = Periodogram::from_values(Array2::from_elem((2, 8), 1.0)).unwrap();
        assert!(whittle_loglik(&pg, &params, &psi).is_err());
    }
}
