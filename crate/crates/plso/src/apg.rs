//! Window-power inference: inexact accelerated proximal gradient with
//! Barzilai-Borwein step initialization and backtracking, the random-walk
//! proximal operator solved by scalar Kalman smoothers, finite-difference
//! conjugate-gradient refinement of lengthscales and center frequencies, and
//! the outer block coordinate loop that alternates the two.

use ndarray::Array2;

use crate::error::{PlsoError, Result};
use crate::model::{Lambda, LogVarianceField, ModelParams, DEFAULT_LOG_POWER_BOUND};
use crate::selection;
use crate::whittle::{grad_with_shapes, loglik_with_shapes, periodogram, spectral_shapes, Periodogram};

/// Settings for the accelerated proximal gradient loop.
#[derive(Debug, Clone)]
pub struct ApgConfig {
    /// Iteration cap L.
    pub max_iters: usize,
    /// Sufficient-decrease constant delta in the backtracking test
    /// h(candidate) <= h(anchor) - delta ||candidate - anchor||^2.
    pub sufficient_decrease: f64,
    /// Step shrink factor applied on each failed backtrack (the line-search
    /// rho of the algorithm; renamed to avoid colliding with the process
    /// decay rates).
    pub shrink: f64,
    /// Backtracks allowed per proximal update before giving up.
    pub max_backtracks: usize,
    /// Stop when |h_l - h_{l-1}| <= tol * (1 + |h_l|).
    pub tol: f64,
    /// Box bound on log powers; iterates are projected to |psi| <= bound.
    pub log_power_bound: f64,
    /// Step size used before any BB history exists and as the fallback when a
    /// BB quotient is unusable. The analytic 1/C bound is far too small to
    /// move the iterate at all, so a unit step plus backtracking does the
    /// scale discovery instead.
    pub initial_step: f64,
}

impl Default for ApgConfig {
    fn default() -> Self {
        ApgConfig {
            max_iters: 500,
            sufficient_decrease: 1e-4,
            shrink: 0.5,
            max_backtracks: 60,
            tol: 1e-8,
            log_power_bound: DEFAULT_LOG_POWER_BOUND,
            initial_step: 1.0,
        }
    }
}

/// Auxiliary iterates of the accelerated scheme.
#[derive(Debug, Clone)]
pub struct ApgState {
    pub psi: Array2<f64>,
    pub u: Array2<f64>,
    pub w: Array2<f64>,
    pub x: Array2<f64>,
    pub beta_prev: f64,
    pub beta: f64,
    pub step_w: f64,
    pub step_psi: f64,
    pub iter: usize,
}

/// Non-fatal events observed while fitting.
#[derive(Debug, Clone, PartialEq)]
pub enum FitWarning {
    /// Backtracking hit its cap; the fit returned the best iterate so far.
    BacktrackingExhausted { iter: usize },
    /// No improving step was found for the lengthscales and frequencies; the
    /// parameters were returned unchanged.
    ThetaLineSearchFailed,
    /// The noise-estimation cutoff exceeded the usable band and was clipped.
    CutoffClipped { requested_hz: f64, used_hz: f64 },
    /// A fitted center frequency sits close to the fold Nyquist rate, where
    /// half-rate cross-validation folds cannot represent it.
    AliasedFrequency { component: usize, freq: f64 },
}

impl std::fmt::Display for FitWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitWarning::BacktrackingExhausted { iter } => {
                write!(f, "backtracking exhausted at iteration {iter}; returned best iterate")
            }
            FitWarning::ThetaLineSearchFailed => {
                write!(f, "lengthscale/frequency line search failed; parameters unchanged")
            }
            FitWarning::CutoffClipped { requested_hz, used_hz } => {
                write!(f, "noise cutoff {requested_hz} Hz clipped to {used_hz} Hz")
            }
            FitWarning::AliasedFrequency { component, freq } => {
                write!(f, "component {component} at {freq} rad/sample is near the fold Nyquist rate")
            }
        }
    }
}

/// Result of a window-power fit.
#[derive(Debug, Clone)]
pub struct ApgOutput {
    pub psi: LogVarianceField,
    /// Objective h = -(f + g) at the initial point and after every accepted
    /// iterate; nonincreasing.
    pub trace: Vec<f64>,
    pub warnings: Vec<FitWarning>,
    /// Largest observed value of h(candidate) - [h(anchor) - delta d2] over
    /// accepted steps; nonpositive when every accepted step satisfied the
    /// sufficient-decrease inequality.
    pub max_decrease_violation: f64,
}

fn sq_norm_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn project_box(mut v: Array2<f64>, bound: f64) -> Array2<f64> {
    v.mapv_inplace(|x| x.clamp(-bound, bound));
    v
}

fn prior_value(psi: &Array2<f64>, lambda: Lambda) -> f64 {
    match lambda {
        Lambda::Stationary => 0.0,
        Lambda::Value(l) => {
            let mut acc = 0.0;
            for j in 0..psi.nrows() {
                for m in 1..psi.ncols() {
                    let d = psi[[j, m]] - psi[[j, m - 1]];
                    acc += d * d;
                }
            }
            -0.5 * l * acc
        }
    }
}

/// Proximal map of the smoothness prior: the minimizer over psi of
/// sum (v - psi)^2 / (2 step) + (lambda/2) sum (psi_m - psi_{m-1})^2,
/// computed row by row with a scalar random-walk Kalman smoother
/// (observations v, observation variance `step`, state variance 1/lambda).
pub fn prox_smoothness(v: &Array2<f64>, step: f64, lambda: Lambda) -> Array2<f64> {
    assert!(step > 0.0, "proximal step must be positive");
    match lambda {
        Lambda::Value(l) if l == 0.0 => v.clone(),
        Lambda::Stationary => {
            let mut out = v.clone();
            for mut row in out.rows_mut() {
                let mean = row.sum() / row.len() as f64;
                row.fill(mean);
            }
            out
        }
        Lambda::Value(l) => {
            let m_windows = v.ncols();
            let q = 1.0 / l;
            let mut out = v.clone();
            let mut filt_mean = vec![0.0; m_windows];
            let mut filt_var = vec![0.0; m_windows];
            for j in 0..v.nrows() {
                // Flat prior on the first window: posterior after seeing v[0]
                // is exactly N(v[0], step).
                filt_mean[0] = v[[j, 0]];
                filt_var[0] = step;
                for m in 1..m_windows {
                    let pred_var = filt_var[m - 1] + q;
                    let gain = pred_var / (pred_var + step);
                    filt_mean[m] = filt_mean[m - 1] + gain * (v[[j, m]] - filt_mean[m - 1]);
                    filt_var[m] = (1.0 - gain) * pred_var;
                }
                out[[j, m_windows - 1]] = filt_mean[m_windows - 1];
                for m in (0..m_windows - 1).rev() {
                    let pred_var = filt_var[m] + q;
                    let gain = filt_var[m] / pred_var;
                    out[[j, m]] = filt_mean[m] + gain * (out[[j, m + 1]] - filt_mean[m]);
                }
            }
            out
        }
    }
}

struct Backtracked {
    candidate: Array2<f64>,
    h: f64,
    violation: f64,
}

/// Fits the window log powers by the inexact accelerated proximal gradient
/// scheme: extrapolate, take a gradient-ascent step on the likelihood, apply
/// the prior's proximal map, and accept via the sufficient-decrease test,
/// keeping the better of the extrapolated and plain candidates each round.
pub fn apg_fit_psi(
    pg: &Periodogram,
    params: &ModelParams,
    psi0: &LogVarianceField,
    cfg: &ApgConfig,
) -> Result<ApgOutput> {
    if psi0.n_components() != params.n_components() {
        return Err(PlsoError::DimensionMismatch(format!(
            "initial field has {} components, params have {}",
            psi0.n_components(),
            params.n_components()
        )));
    }
    if psi0.window_len() != pg.window_len() || psi0.n_windows() != pg.n_windows() {
        return Err(PlsoError::DimensionMismatch(
            "initial field and periodogram disagree on windowing".into(),
        ));
    }
    let lambda = params.lambda;
    let bound = cfg.log_power_bound;
    let alpha = spectral_shapes(params, pg.window_len());

    let h_of = |psi: &Array2<f64>| -> Result<f64> {
        Ok(-(loglik_with_shapes(pg, params, psi, &alpha)? + prior_value(psi, lambda)))
    };
    let grad_of = |psi: &Array2<f64>| grad_with_shapes(pg, params, psi, &alpha);

    let backtrack = |anchor: &Array2<f64>,
                     anchor_h: f64,
                     grad_anchor: &Array2<f64>,
                     step0: f64|
     -> Result<Option<Backtracked>> {
        let mut step = step0;
        for _ in 0..=cfg.max_backtracks {
            let moved = anchor + &(grad_anchor * step);
            let candidate = project_box(prox_smoothness(&moved, step, lambda), bound);
            let h_cand = h_of(&candidate)?;
            let d2 = sq_norm_diff(&candidate, anchor);
            let allowed = anchor_h - cfg.sufficient_decrease * d2;
            if h_cand <= allowed {
                return Ok(Some(Backtracked {
                    candidate,
                    h: h_cand,
                    violation: h_cand - allowed,
                }));
            }
            step *= cfg.shrink;
        }
        Ok(None)
    };

    // Under the stationary flag the proximal map returns row means whatever
    // the step size, so a candidate only approaches its anchor when the
    // anchor already has constant rows. Start inside that subspace.
    let start = match lambda {
        Lambda::Stationary => prox_smoothness(psi0.values(), 1.0, Lambda::Stationary),
        Lambda::Value(_) => psi0.values().clone(),
    };
    let mut psi_prev = project_box(start, bound);
    let mut psi_cur = psi_prev.clone();
    let mut u = psi_prev.clone();
    let mut x = psi_prev.clone();
    let mut w_prev = psi_prev.clone();
    let mut grad_w_prev = grad_of(&w_prev)?;
    let mut grad_psi_prev = grad_w_prev.clone();

    let mut beta_prev = 0.0f64;
    let mut beta = 1.0f64;
    let mut h_cur = h_of(&psi_cur)?;
    let mut trace = vec![h_cur];
    let mut warnings = Vec::new();
    let mut max_violation = f64::NEG_INFINITY;

    for iter in 1..=cfg.max_iters {
        let w = &psi_cur
            + &((&u - &psi_cur) * (beta_prev / beta))
            + &((&psi_cur - &psi_prev) * ((beta_prev - 1.0) / beta));
        let grad_w = grad_of(&w)?;
        let h_w = h_of(&w)?;

        let (step_w, step_x) = if iter == 1 {
            (cfg.initial_step, cfg.initial_step)
        } else {
            let bb = |s_from: &Array2<f64>, s_to: &Array2<f64>, g_from: &Array2<f64>, g_to: &Array2<f64>| {
                let s = s_to - s_from;
                // Gradient of -f grows along s for a convex stretch; r is the
                // difference of descent gradients as the algorithm writes it.
                let r = g_from - g_to;
                let ss = dot(&s, &s);
                let sr = dot(&s, &r);
                if sr > 0.0 && ss > 0.0 {
                    let step = ss / sr;
                    if step.is_finite() && step > 0.0 {
                        return step;
                    }
                }
                cfg.initial_step
            };
            let g_u = grad_of(&u)?;
            let g_x = grad_of(&x)?;
            (
                bb(&w_prev, &u, &grad_w_prev, &g_u),
                bb(&psi_prev, &x, &grad_psi_prev, &g_x),
            )
        };

        let u_next = backtrack(&w, h_w, &grad_w, step_w)?;
        let grad_psi = grad_of(&psi_cur)?;
        let x_next = backtrack(&psi_cur, h_cur, &grad_psi, step_x)?;

        let (u_next, x_next) = match (u_next, x_next) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                warnings.push(FitWarning::BacktrackingExhausted { iter });
                break;
            }
        };
        max_violation = max_violation.max(u_next.violation).max(x_next.violation);

        // Tie goes to the extrapolated candidate.
        let (psi_next, h_next) = if u_next.h <= x_next.h {
            (u_next.candidate.clone(), u_next.h)
        } else {
            (x_next.candidate.clone(), x_next.h)
        };

        psi_prev = std::mem::replace(&mut psi_cur, psi_next);
        u = u_next.candidate;
        x = x_next.candidate;
        grad_w_prev = grad_w;
        grad_psi_prev = grad_psi;
        w_prev = w;
        let beta_next = 0.5 * (1.0 + (4.0 * beta * beta + 1.0).sqrt());
        beta_prev = beta;
        beta = beta_next;

        let h_old = h_cur;
        h_cur = h_next;
        trace.push(h_cur);
        if (h_old - h_cur).abs() <= cfg.tol * (1.0 + h_cur.abs()) {
            break;
        }
    }

    Ok(ApgOutput {
        psi: LogVarianceField::new(psi_cur, pg.window_len())?,
        trace,
        warnings,
        max_decrease_violation: if max_violation == f64::NEG_INFINITY {
            0.0
        } else {
            max_violation
        },
    })
}

/// Settings shared by the full fitting pipeline.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub apg: ApgConfig,
    /// Rounds of the outer block coordinate loop.
    pub outer_iters: usize,
    /// Cutoff (Hz) above which the spectrum is treated as observation noise;
    /// defaults to 80% of Nyquist.
    pub cutoff_hz: Option<f64>,
    /// Peak threshold for initialization, as a multiple of the median mean
    /// periodogram power.
    pub prominence_threshold: f64,
    /// Initial lengthscale as a fraction of the period at the initial center
    /// frequency.
    pub lengthscale_fraction: f64,
    /// Upper bound on lengthscales; defaults to a quarter window.
    pub max_lengthscale: Option<f64>,
    /// Iteration cap for the conjugate-gradient refinement of theta.
    pub refine_max_iters: usize,
    /// Component indices whose center frequencies are held fixed.
    pub freeze_center_freqs: Vec<usize>,
    /// When false, the block coordinate loop updates only the window powers.
    pub refit_theta: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            apg: ApgConfig::default(),
            outer_iters: 5,
            cutoff_hz: None,
            prominence_threshold: 5.0,
            lengthscale_fraction: 1.0,
            max_lengthscale: None,
            refine_max_iters: 40,
            freeze_center_freqs: Vec::new(),
            refit_theta: true,
        }
    }
}

impl FitConfig {
    pub fn resolve_cutoff_hz(&self, delta: f64) -> f64 {
        let nyquist = 0.5 / delta;
        self.cutoff_hz.unwrap_or(0.8 * nyquist)
    }

    pub fn resolve_max_lengthscale(&self, window_len: usize, delta: f64) -> f64 {
        self.max_lengthscale
            .unwrap_or_else(|| crate::model::default_max_lengthscale(window_len, delta))
    }
}

/// Refines lengthscales and center frequencies against the Whittle likelihood
/// at fixed window powers, by Polak-Ribiere conjugate gradient with central
/// finite differences and projection onto (0, l_max] x [0, pi]. The returned
/// parameters never decrease the likelihood.
pub fn refine_theta(
    pg: &Periodogram,
    params: &ModelParams,
    psi: &LogVarianceField,
    cfg: &FitConfig,
) -> Result<(ModelParams, Vec<FitWarning>)> {
    let n_comp = params.n_components();
    if n_comp == 0 {
        return Ok((params.clone(), Vec::new()));
    }
    let l_max = params.max_lengthscale;
    let l_min = (params.delta * 1e-2).min(l_max / 2.0);
    let dim = 2 * n_comp;
    let frozen: Vec<bool> = (0..dim)
        .map(|i| i >= n_comp && cfg.freeze_center_freqs.contains(&(i - n_comp)))
        .collect();

    let project = |t: &mut [f64]| {
        for j in 0..n_comp {
            t[j] = t[j].clamp(l_min, l_max);
            t[n_comp + j] = t[n_comp + j].clamp(0.0, std::f64::consts::PI);
        }
    };

    let eval = |t: &[f64]| -> Result<f64> {
        let p = ModelParams::new(
            params.delta,
            params.lambda,
            params.obs_noise_var,
            t[..n_comp].to_vec(),
            t[n_comp..].to_vec(),
            l_max,
        )?;
        let alpha = spectral_shapes(&p, pg.window_len());
        // Negated likelihood: the search minimizes.
        Ok(-loglik_with_shapes(pg, &p, psi.values(), &alpha)?)
    };

    let fd_grad = |t: &[f64], out: &mut [f64]| -> Result<()> {
        for i in 0..dim {
            if frozen[i] {
                out[i] = 0.0;
                continue;
            }
            let h = 1e-6 * t[i].abs().max(1e-3);
            let mut tp = t.to_vec();
            let mut tm = t.to_vec();
            tp[i] += h;
            tm[i] -= h;
            project(&mut tp);
            project(&mut tm);
            let span = tp[i] - tm[i];
            out[i] = if span > 0.0 {
                (eval(&tp)? - eval(&tm)?) / span
            } else {
                0.0
            };
        }
        Ok(())
    };

    let mut t: Vec<f64> = params
        .lengthscales
        .iter()
        .chain(params.center_freqs.iter())
        .copied()
        .collect();
    project(&mut t);
    let mut f_cur = eval(&t)?;
    let f_init = f_cur;
    let mut grad = vec![0.0; dim];
    let mut grad_prev = vec![0.0; dim];
    let mut dir = vec![0.0; dim];
    let mut warnings = Vec::new();
    let mut improved = false;

    fd_grad(&t, &mut grad)?;
    for i in 0..dim {
        dir[i] = -grad[i];
    }

    for _ in 0..cfg.refine_max_iters {
        let dir_norm: f64 = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if dir_norm < 1e-14 {
            break;
        }
        // Backtracking line search along dir with projection.
        let mut step = 1.0 / dir_norm.max(1.0);
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = t.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
            project(&mut trial);
            let f_trial = eval(&trial)?;
            if f_trial < f_cur - 1e-14 * (1.0 + f_cur.abs()) {
                accepted = Some((trial, f_trial));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, f_trial)) = accepted else {
            break;
        };
        improved = true;
        let f_old = f_cur;
        t = trial;
        f_cur = f_trial;
        if (f_old - f_cur).abs() <= 1e-10 * (1.0 + f_cur.abs()) {
            break;
        }
        std::mem::swap(&mut grad, &mut grad_prev);
        fd_grad(&t, &mut grad)?;
        let denom: f64 = grad_prev.iter().map(|g| g * g).sum();
        let numer: f64 = grad.iter().zip(grad_prev.iter()).map(|(g, gp)| g * (g - gp)).sum();
        let beta = if denom > 0.0 { (numer / denom).max(0.0) } else { 0.0 };
        let mut descent = 0.0;
        for i in 0..dim {
            dir[i] = -grad[i] + beta * dir[i];
            descent += dir[i] * grad[i];
        }
        if descent >= 0.0 {
            for i in 0..dim {
                dir[i] = -grad[i];
            }
        }
    }

    if !improved {
        warnings.push(FitWarning::ThetaLineSearchFailed);
        return Ok((params.clone(), warnings));
    }
    debug_assert!(f_cur <= f_init);
    let refined = ModelParams::new(
        params.delta,
        params.lambda,
        params.obs_noise_var,
        t[..n_comp].to_vec(),
        t[n_comp..].to_vec(),
        l_max,
    )?;
    Ok((refined, warnings))
}

/// Full Stage-1 fit.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub params: ModelParams,
    pub psi: LogVarianceField,
    /// Objective h after initialization and after each half-step of the
    /// outer loop; nonincreasing.
    pub trace: Vec<f64>,
    pub warnings: Vec<FitWarning>,
}

/// Estimates the observation noise from the high-frequency spectral floor,
/// initializes components from periodogram peaks, then alternates window
/// power fits with lengthscale/frequency refinement for `cfg.outer_iters`
/// rounds at the requested smoothness weight.
pub fn block_coordinate_fit(
    observations: &[f64],
    delta: f64,
    window_len: usize,
    n_components: usize,
    lambda: Lambda,
    cfg: &FitConfig,
) -> Result<FitOutput> {
    if n_components == 0 {
        return Err(PlsoError::InvalidParameter(
            "fitting requires at least one component".into(),
        ));
    }
    let cutoff = cfg.resolve_cutoff_hz(delta);
    let sigma_nu2 = selection::estimate_obs_noise(observations, delta, cutoff)?;
    let (mut params, mut psi) =
        selection::initialize(observations, delta, window_len, n_components, sigma_nu2, lambda, cfg)?;
    let pg = periodogram(observations, window_len)?;

    let mut warnings = Vec::new();
    let alpha = spectral_shapes(&params, window_len);
    let h0 = -(loglik_with_shapes(&pg, &params, psi.values(), &alpha)?
        + prior_value(psi.values(), lambda));
    let mut trace = vec![h0];

    for _round in 0..cfg.outer_iters {
        let apg_out = apg_fit_psi(&pg, &params, &psi, &cfg.apg)?;
        psi = apg_out.psi;
        warnings.extend(apg_out.warnings);
        trace.push(*apg_out.trace.last().expect("trace is never empty"));

        if cfg.refit_theta {
            let (refined, theta_warnings) = refine_theta(&pg, &params, &psi, cfg)?;
            params = refined;
            warnings.extend(theta_warnings);
            let alpha = spectral_shapes(&params, window_len);
            trace.push(
                -(loglik_with_shapes(&pg, &params, psi.values(), &alpha)?
                    + prior_value(psi.values(), lambda)),
            );
        }
    }

    Ok(FitOutput {
        params,
        psi,
        trace,
        warnings,
    })
}
