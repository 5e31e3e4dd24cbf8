//! Shared oracles and generators for the integration tests. Everything here
//! is an independent route to the quantities the library computes: dense
//! linear algebra instead of recursions, quadrature instead of closed forms.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use plso::{LogVarianceField, ModelParams, Periodogram};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Solves the dense stationarity system of the proximal problem,
/// (I/alpha + lambda D'D) psi = v/alpha, for one row, with one step of
/// iterative refinement to push the residual toward machine precision.
pub fn prox_row_dense(v: &[f64], step: f64, lambda: f64) -> Vec<f64> {
    let m = v.len();
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        a[(i, i)] = 1.0 / step;
        if i > 0 {
            a[(i, i)] += lambda;
            a[(i, i - 1)] -= lambda;
        }
        if i + 1 < m {
            a[(i, i)] += lambda;
            a[(i, i + 1)] -= lambda;
        }
    }
    let rhs = DVector::from_iterator(m, v.iter().map(|x| x / step));
    let lu = a.clone().lu();
    let mut sol = lu.solve(&rhs).expect("prox system is positive definite");
    // One refinement pass.
    let residual = &rhs - &a * &sol;
    if let Some(correction) = lu.solve(&residual) {
        sol += correction;
    }
    sol.iter().copied().collect()
}

/// Dense joint-Gaussian smoothing: builds the full prior covariance of the
/// stacked states from the recursion, conditions on the observations by a
/// single linear solve and returns per-sample means, per-sample covariance
/// blocks and the marginal log-density of the observations.
pub struct DensePosterior {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
    pub loglik: f64,
}

pub fn dense_smoother_oracle(
    observations: &[f64],
    params: &ModelParams,
    psi: &LogVarianceField,
) -> DensePosterior {
    let k_total = observations.len();
    let n_comp = params.n_components();
    let dim = 2 * n_comp;
    let full = dim * k_total;

    // Marginal state variance per component and time (scalar, times I2).
    let mut marg = vec![vec![0.0; k_total]; n_comp];
    for j in 0..n_comp {
        let rho2 = params.decay(j).powi(2);
        marg[j][0] = psi.variance(j, 0);
        for k in 1..k_total {
            let m = psi.window_of_sample(k);
            marg[j][k] = rho2 * marg[j][k - 1] + psi.variance(j, m) * (1.0 - rho2);
        }
    }

    // Prior covariance of the stacked state, ordered time-major.
    let mut sigma = DMatrix::zeros(full, full);
    for j in 0..n_comp {
        let rho = params.decay(j);
        let w = params.center_freqs[j];
        for k in 0..k_total {
            for kp in 0..=k {
                let d = (k - kp) as f64;
                let scale = rho.powf(d) * marg[j][kp];
                let (s, c) = (w * d).sin_cos();
                // (rho R)^d * p[kp]; rows are time k, columns time kp.
                let block = [[c * scale, -s * scale], [s * scale, c * scale]];
                for r in 0..2 {
                    for q in 0..2 {
                        let row = k * dim + 2 * j + r;
                        let col = kp * dim + 2 * j + q;
                        sigma[(row, col)] = block[r][q];
                        // The mirrored block is the transpose.
                        sigma[(col, row)] = block[r][q];
                    }
                }
            }
        }
    }

    // y = H z + noise with H selecting the real parts.
    let mut czy = DMatrix::zeros(full, k_total);
    for kp in 0..k_total {
        for row in 0..full {
            let mut acc = 0.0;
            for j in 0..n_comp {
                acc += sigma[(row, kp * dim + 2 * j)];
            }
            czy[(row, kp)] = acc;
        }
    }
    let mut cyy = DMatrix::zeros(k_total, k_total);
    for k in 0..k_total {
        for kp in 0..k_total {
            let mut acc = 0.0;
            for j in 0..n_comp {
                acc += czy[(k * dim + 2 * j, kp)];
            }
            cyy[(k, kp)] = acc;
        }
        cyy[(k, k)] += params.obs_noise_var;
    }

    let y = DVector::from_column_slice(observations);
    let chol = cyy.clone().cholesky().expect("observation covariance is PD");
    let alpha = chol.solve(&y);
    let mean_full = &czy * &alpha;
    let cov_reduction = &czy * chol.solve(&czy.transpose());

    let mut means = Vec::with_capacity(k_total);
    let mut covs = Vec::with_capacity(k_total);
    for k in 0..k_total {
        means.push(DVector::from_iterator(
            dim,
            (0..dim).map(|d| mean_full[k * dim + d]),
        ));
        let mut block = DMatrix::zeros(dim, dim);
        for r in 0..dim {
            for q in 0..dim {
                block[(r, q)] =
                    sigma[(k * dim + r, k * dim + q)] - cov_reduction[(k * dim + r, k * dim + q)];
            }
        }
        covs.push(block);
    }

    let mut logdet = 0.0;
    for i in 0..k_total {
        logdet += 2.0 * chol.l_dirty()[(i, i)].ln();
    }
    let loglik = -0.5 * (k_total as f64 * (2.0 * PI).ln() + logdet + y.dot(&alpha));

    DensePosterior { means, covs, loglik }
}

/// Central finite differences of the Whittle log-likelihood in every log
/// power, with the given step.
pub fn fd_grad_loglik(
    pg: &Periodogram,
    params: &ModelParams,
    psi: &LogVarianceField,
    step: f64,
) -> ndarray::Array2<f64> {
    let mut out = ndarray::Array2::zeros((psi.n_components(), psi.n_windows()));
    for j in 0..psi.n_components() {
        for m in 0..psi.n_windows() {
            let mut plus = psi.values().clone();
            let mut minus = psi.values().clone();
            plus[[j, m]] += step;
            minus[[j, m]] -= step;
            let f_plus = plso::whittle_loglik(
                pg,
                params,
                &LogVarianceField::new(plus, psi.window_len()).unwrap(),
            )
            .unwrap();
            let f_minus = plso::whittle_loglik(
                pg,
                params,
                &LogVarianceField::new(minus, psi.window_len()).unwrap(),
            )
            .unwrap();
            out[[j, m]] = (f_plus - f_minus) / (2.0 * step);
        }
    }
    out
}

/// Random fitting instance used by the gradient and Lipschitz probes.
pub struct RandomInstance {
    pub params: ModelParams,
    pub psi: LogVarianceField,
    pub pg: Periodogram,
}

pub fn random_instance(
    seed: u64,
    max_components: usize,
    max_windows: usize,
    max_window_len: usize,
) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_comp = rng.random_range(1..=max_components);
    let n_windows = rng.random_range(1..=max_windows);
    let window_len = 2 * rng.random_range(1..=max_window_len / 2).max(1);
    let delta = 10f64.powf(rng.random_range(-3.0..-1.0f64));
    let l_max = window_len as f64 * delta;
    let lengthscales: Vec<f64> = (0..n_comp)
        .map(|_| {
            let lo = (5.0 * delta).min(l_max / 2.0);
            lo + rng.random_range(0.0..1.0f64) * (l_max - lo)
        })
        .collect();
    let center_freqs: Vec<f64> = (0..n_comp)
        .map(|_| rng.random_range(0.05..PI - 0.05))
        .collect();
    let obs_noise_var = rng.random_range(0.1..5.0f64);
    let params = ModelParams::new(
        delta,
        plso::Lambda::Value(rng.random_range(0.0..3.0f64)),
        obs_noise_var,
        lengthscales,
        center_freqs,
        l_max,
    )
    .unwrap();
    let psi = LogVarianceField::new(
        ndarray::Array2::from_shape_fn((n_comp, n_windows), |_| rng.random_range(-1.5..1.5f64)),
        window_len,
    )
    .unwrap();
    let pg = Periodogram::from_values(ndarray::Array2::from_shape_fn(
        (n_windows, window_len),
        |_| rng.random_range(0.05..5.0f64),
    ))
    .unwrap();
    RandomInstance { params, psi, pg }
}

/// Relative disagreement with a floor on the denominator.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}
