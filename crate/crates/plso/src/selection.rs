//! Initialization and model selection: observation-noise estimation from the
//! high-frequency spectral floor, component seeding from periodogram peaks,
//! AIC over the component count and even/odd two-fold cross-validation over
//! the smoothness weight.

use std::collections::BTreeMap;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::apg::{apg_fit_psi, block_coordinate_fit, FitConfig, FitWarning};
use crate::error::{PlsoError, Result};
use crate::model::{Lambda, LogVarianceField, ModelParams};
use crate::whittle::{periodogram, whittle_loglik};
use ndarray::Array2;

/// Estimates the observation noise variance as the mean of the full-record
/// normalized periodogram over [cutoff_hz, Nyquist].
pub fn estimate_obs_noise(observations: &[f64], delta: f64, cutoff_hz: f64) -> Result<f64> {
    if observations.len() < 2 {
        return Err(PlsoError::InvalidParameter(
            "noise estimation needs at least two samples".into(),
        ));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(PlsoError::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let k = observations.len();
    let nyquist = 0.5 / delta;
    if !(cutoff_hz.is_finite() && cutoff_hz >= 0.0 && cutoff_hz < nyquist) {
        return Err(PlsoError::InvalidParameter(format!(
            "cutoff {cutoff_hz} Hz leaves an empty band below Nyquist {nyquist} Hz"
        )));
    }
    let fft = FftPlanner::new().plan_fft_forward(k);
    let mut buf: Vec<Complex<f64>> = observations.iter().map(|&y| Complex::new(y, 0.0)).collect();
    fft.process(&mut buf);

    // Bin n sits at n / (K delta) Hz.
    let lo = (cutoff_hz * k as f64 * delta).ceil() as usize;
    let hi = k / 2;
    if lo > hi {
        return Err(PlsoError::InvalidParameter(format!(
            "cutoff {cutoff_hz} Hz leaves no periodogram bins below Nyquist"
        )));
    }
    let mut acc = 0.0;
    for n in lo..=hi {
        acc += buf[n].norm_sqr() / k as f64;
    }
    Ok(acc / (hi - lo + 1) as f64)
}

/// Seeds a model: center frequencies from prominent mean-periodogram peaks
/// (the strongest first, any remainder spread uniformly over [0, cutoff]),
/// lengthscales from the seeded periods, and window powers from a fit with
/// the smoothness weight switched off.
pub fn initialize(
    observations: &[f64],
    delta: f64,
    window_len: usize,
    n_components: usize,
    sigma_nu2: f64,
    lambda: Lambda,
    cfg: &FitConfig,
) -> Result<(ModelParams, LogVarianceField)> {
    if n_components == 0 {
        return Err(PlsoError::InvalidParameter("at least one component required".into()));
    }
    let pg = periodogram(observations, window_len)?;
    let n = window_len;
    let m_windows = pg.n_windows();
    let cutoff_hz = cfg.resolve_cutoff_hz(delta);
    let cutoff_rad = (2.0 * std::f64::consts::PI * cutoff_hz * delta).min(std::f64::consts::PI);
    let l_max = cfg.resolve_max_lengthscale(window_len, delta);

    // Mean periodogram over windows, half grid only.
    let half = n / 2;
    let mean_pg: Vec<f64> = (0..=half)
        .map(|i| (0..m_windows).map(|m| pg.values()[[m, i]]).sum::<f64>() / m_windows as f64)
        .collect();
    let mut sorted = mean_pg.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = sorted[sorted.len() / 2];
    let threshold = cfg.prominence_threshold * median;

    // Strict local maxima above threshold, at or below the cutoff.
    let mut peaks: Vec<(usize, f64)> = Vec::new();
    for i in 1..half {
        let w = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        if w <= cutoff_rad
            && mean_pg[i] > mean_pg[i - 1]
            && mean_pg[i] >= mean_pg[i + 1]
            && mean_pg[i] > threshold
        {
            peaks.push((i, mean_pg[i]));
        }
    }
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    peaks.truncate(n_components);

    let mut freqs: Vec<f64> = peaks
        .iter()
        .map(|&(i, _)| 2.0 * std::f64::consts::PI * i as f64 / n as f64)
        .collect();
    let remaining = n_components - freqs.len();
    for i in 0..remaining {
        freqs.push(cutoff_rad * (i + 1) as f64 / (remaining + 1) as f64);
    }
    freqs.sort_by(|a, b| a.total_cmp(b));

    let lengthscales: Vec<f64> = freqs
        .iter()
        .map(|&w| {
            let period_s = delta * 2.0 * std::f64::consts::PI / w.max(1e-12);
            (cfg.lengthscale_fraction * period_s).max(10.0 * delta).min(l_max)
        })
        .collect();

    let params = ModelParams::new(delta, lambda, sigma_nu2, lengthscales, freqs, l_max)?;

    // Flat log-power start: split each window's mean power evenly.
    let bound = cfg.apg.log_power_bound;
    let mut psi0 = Array2::zeros((n_components, m_windows));
    for m in 0..m_windows {
        let mean_power: f64 = (0..n).map(|i| pg.values()[[m, i]]).sum::<f64>() / n as f64;
        let v = (mean_power / n_components as f64).max(1e-300).ln().clamp(-bound, bound);
        for j in 0..n_components {
            psi0[[j, m]] = v;
        }
    }
    let psi0 = LogVarianceField::new(psi0, window_len)?;

    // Window powers from a smoothness-free fit; these seed every lambda.
    let init_params = ModelParams::new(
        delta,
        Lambda::Value(0.0),
        sigma_nu2,
        params.lengthscales.clone(),
        params.center_freqs.clone(),
        l_max,
    )?;
    let out = apg_fit_psi(&pg, &init_params, &psi0, &cfg.apg)?;
    Ok((params, out.psi))
}

/// AIC for a component count: fit with the smoothness weight off, evaluate
/// the Whittle log-likelihood at the optimum and penalize three parameters
/// per component: AIC(J) = -(2/M) loglik + 6 J.
pub fn aic(
    observations: &[f64],
    delta: f64,
    window_len: usize,
    n_components: usize,
    cfg: &FitConfig,
) -> Result<f64> {
    let fit = block_coordinate_fit(observations, delta, window_len, n_components, Lambda::Value(0.0), cfg)?;
    let pg = periodogram(observations, window_len)?;
    let loglik = whittle_loglik(&pg, &fit.params, &fit.psi)?;
    Ok(aic_from_loglik(loglik, pg.n_windows(), n_components))
}

/// The AIC formula itself.
pub fn aic_from_loglik(loglik: f64, n_windows: usize, n_components: usize) -> f64 {
    -(2.0 / n_windows as f64) * loglik + 6.0 * n_components as f64
}

/// Component-count selection.
#[derive(Debug, Clone)]
pub struct JSelection {
    pub aic_by_j: BTreeMap<usize, f64>,
    pub chosen: usize,
}

/// Evaluates AIC over the candidate component counts and picks the
/// minimizer; ties go to the smaller count.
pub fn select_j(
    observations: &[f64],
    delta: f64,
    window_len: usize,
    candidates: &[usize],
    cfg: &FitConfig,
) -> Result<JSelection> {
    if candidates.is_empty() {
        return Err(PlsoError::InvalidParameter("empty component-count candidate list".into()));
    }
    let mut aic_by_j = BTreeMap::new();
    for &j in candidates {
        aic_by_j.insert(j, aic(observations, delta, window_len, j, cfg)?);
    }
    // BTreeMap iterates ascending, so strict improvement keeps the smaller J
    // on ties.
    let mut chosen = *candidates.iter().min().expect("nonempty");
    let mut best = f64::INFINITY;
    for (&j, &value) in &aic_by_j {
        if value < best {
            best = value;
            chosen = j;
        }
    }
    Ok(JSelection { aic_by_j, chosen })
}

/// Smoothness-weight selection by even/odd two-fold cross-validation.
#[derive(Debug, Clone)]
pub struct LambdaSelection {
    pub scores: Vec<(Lambda, f64)>,
    pub chosen: Lambda,
    pub warnings: Vec<FitWarning>,
}

/// Default search grid for the smoothness weight.
pub fn default_lambda_grid() -> Vec<Lambda> {
    vec![
        Lambda::Value(0.0),
        Lambda::Value(1e-2),
        Lambda::Value(1e-1),
        Lambda::Value(1.0),
        Lambda::Value(10.0),
        Lambda::Value(100.0),
        Lambda::Stationary,
    ]
}

fn lambda_rank(l: Lambda) -> f64 {
    match l {
        Lambda::Value(v) => v,
        Lambda::Stationary => f64::INFINITY,
    }
}

/// Splits the record into even- and odd-indexed subsequences (spacing 2
/// delta, windows of N/2), fits each fold at every grid value and scores the
/// held-out fold's periodogram under the fitted spectra; the two directions
/// are averaged. The maximizer wins; ties go to the larger weight.
pub fn cross_validate_lambda(
    observations: &[f64],
    delta: f64,
    window_len: usize,
    n_components: usize,
    grid: &[Lambda],
    cfg: &FitConfig,
) -> Result<LambdaSelection> {
    if grid.is_empty() {
        return Err(PlsoError::InvalidParameter("empty lambda grid".into()));
    }
    if window_len % 2 != 0 || window_len < 4 {
        return Err(PlsoError::InvalidParameter(format!(
            "even/odd folds need an even window length of at least 4, got {window_len}"
        )));
    }
    if observations.is_empty() || observations.len() % window_len != 0 {
        return Err(PlsoError::LengthNotDivisible {
            len: observations.len(),
            window_len,
        });
    }

    let even: Vec<f64> = observations.iter().step_by(2).copied().collect();
    let odd: Vec<f64> = observations.iter().skip(1).step_by(2).copied().collect();
    let fold_delta = 2.0 * delta;
    let fold_window = window_len / 2;
    let fold_nyquist = 0.5 / fold_delta;

    let mut warnings = Vec::new();
    let mut fold_cfg = cfg.clone();
    let requested_cutoff = cfg.resolve_cutoff_hz(delta);
    if requested_cutoff >= fold_nyquist {
        let used = 0.8 * fold_nyquist;
        warnings.push(FitWarning::CutoffClipped {
            requested_hz: requested_cutoff,
            used_hz: used,
        });
        fold_cfg.cutoff_hz = Some(used);
    } else {
        fold_cfg.cutoff_hz = Some(requested_cutoff);
    }

    let mut scores = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let mut total = 0.0;
        for (train, test) in [(&even, &odd), (&odd, &even)] {
            let fit = block_coordinate_fit(train, fold_delta, fold_window, n_components, lambda, &fold_cfg)?;
            for (j, &w) in fit.params.center_freqs.iter().enumerate() {
                if w > 0.95 * std::f64::consts::PI {
                    warnings.push(FitWarning::AliasedFrequency { component: j, freq: w });
                }
            }
            let test_pg = periodogram(test, fold_window)?;
            total += whittle_loglik(&test_pg, &fit.params, &fit.psi)?;
        }
        scores.push((lambda, 0.5 * total));
    }

    let mut chosen = scores[0].0;
    let mut best = f64::NEG_INFINITY;
    for &(lambda, score) in &scores {
        if score > best || (score == best && lambda_rank(lambda) > lambda_rank(chosen)) {
            best = score;
            chosen = lambda;
        }
    }
    Ok(LambdaSelection {
        scores,
        chosen,
        warnings,
    })
}
