//! The five commands: simulate, fit, decompose, sample, bench. Each is
//! deterministic given its inputs, configuration and seed; all file writes
//! are atomic.

use plso::{
    block_coordinate_fit, cross_validate_lambda, default_lambda_grid, estimate_obs_noise,
    ffbs_sample, kalman_smooth, phase_estimate, psd, reconstruct_component, run_benchmark,
    select_j, simulate_generative, simulate_modulated_pair, FitConfig, Lambda, LambdaMode,
    LogVarianceField, ModelParams, SimSpec,
};
use serde::Serialize;
use serde_json::json;
use std::path::{Path, PathBuf};

use crate::config::{ConfigFile, GenericSim, LambdaChoice, WindowSpec};
use crate::error::{CliError, Result};
use crate::formats::{
    self, write_atomic, write_table_csv, write_value_csv, FittedModelFile, LambdaRepr,
};

/// Default quantile floor for Monte Carlo phase estimates.
const PHASE_DRAW_FLOOR: usize = 50;

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let body = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("serializing {}: {e}", path.display())))?;
    write_atomic(path, format!("{body}\n").as_bytes())
}

fn divisibility_hint(len: usize, window_len: usize) -> CliError {
    CliError::Data(format!(
        "record length {len} is not divisible by the window length {window_len}; \
         truncate the record to {} samples or pad it to {}",
        (len / window_len) * window_len,
        len.div_ceil(window_len) * window_len
    ))
}

pub struct SimulateArgs {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub config: ConfigFile,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let out = &args.out_dir;
    if let Some(generic) = &args.config.generic_sim {
        return simulate_generic(args, generic, out);
    }
    let mut spec = SimSpec::default();
    if let Some(overrides) = &args.config.sim {
        overrides.apply(&mut spec);
    }
    let bundle = simulate_modulated_pair(&spec, args.seed);
    write_value_csv(&out.join("observations.csv"), &bundle.observations)?;

    let delta = spec.delta();
    let header = vec![
        "k".to_string(),
        "time_s".to_string(),
        "component_1".to_string(),
        "component_2".to_string(),
    ];
    let rows: Vec<Vec<f64>> = (0..bundle.observations.len())
        .map(|k| {
            vec![
                k as f64,
                k as f64 * delta,
                bundle.true_components[[k, 0]],
                bundle.true_components[[k, 1]],
            ]
        })
        .collect();
    write_table_csv(&out.join("ground_truth.csv"), &header, &rows)?;

    let manifest = json!({
        "kind": "modulated_pair",
        "seed": args.seed,
        "n_samples": bundle.observations.len(),
        "sample_rate_hz": spec.sample_rate_hz,
        "spec": {
            "slow_freq_hz": spec.slow_freq_hz,
            "center_freqs_hz": spec.center_freqs_hz,
            "lengthscales_s": spec.lengthscales_s,
            "duration_s": spec.duration_s,
            "noise_var": spec.noise_var,
            "amplitude": spec.amplitude,
        },
        "files": {
            "observations": "observations.csv",
            "ground_truth": "ground_truth.csv",
        },
    });
    write_json(&out.join("manifest.json"), &manifest)
}

fn simulate_generic(args: &SimulateArgs, generic: &GenericSim, out: &Path) -> Result<()> {
    let delta = 1.0 / generic.sample_rate_hz;
    let freqs: Vec<f64> = generic
        .center_freqs_hz
        .iter()
        .map(|f| 2.0 * std::f64::consts::PI * f * delta)
        .collect();
    let l_max = generic
        .lengthscales_s
        .iter()
        .copied()
        .fold(f64::MIN_POSITIVE, f64::max);
    let params = ModelParams::new(
        delta,
        Lambda::Value(0.0),
        generic.obs_noise_var,
        generic.lengthscales_s.clone(),
        freqs,
        l_max,
    )?;
    let n_comp = generic.log_powers.len();
    if n_comp != params.n_components() {
        return Err(CliError::Usage(format!(
            "log_powers has {n_comp} rows but {} components are specified",
            params.n_components()
        )));
    }
    let field = LogVarianceField::from_rows(&generic.log_powers, generic.window_len)?;
    let (observations, latent) = simulate_generative(&params, &field, args.seed)?;
    write_value_csv(&out.join("observations.csv"), &observations)?;

    let mut header = vec!["k".to_string(), "time_s".to_string()];
    for j in 0..n_comp {
        header.push(format!("component_{}", j + 1));
    }
    let rows: Vec<Vec<f64>> = (0..observations.len())
        .map(|k| {
            let mut row = vec![k as f64, k as f64 * delta];
            for j in 0..n_comp {
                row.push(latent.states[[k, j, 0]]);
            }
            row
        })
        .collect();
    write_table_csv(&out.join("ground_truth.csv"), &header, &rows)?;

    let manifest = json!({
        "kind": "generic",
        "seed": args.seed,
        "n_samples": observations.len(),
        "sample_rate_hz": generic.sample_rate_hz,
        "spec": crate::config::config_echo(generic),
        "files": {
            "observations": "observations.csv",
            "ground_truth": "ground_truth.csv",
        },
    });
    write_json(&out.join("manifest.json"), &manifest)
}

pub struct FitArgs {
    pub input: PathBuf,
    pub out_dir: PathBuf,
    pub sample_rate_hz: f64,
    pub window: WindowSpec,
    pub components: Option<usize>,
    pub candidates: Option<Vec<usize>>,
    pub lambda: LambdaChoice,
    pub seed: u64,
    pub fit_cfg: FitConfig,
    pub config_echo: serde_json::Value,
}

#[derive(Serialize)]
struct CvScoreEntry {
    lambda: LambdaRepr,
    score: f64,
}

pub fn cmd_fit(args: &FitArgs) -> Result<PathBuf> {
    let raw = std::fs::read(&args.input)
        .map_err(|e| CliError::io(&format!("reading {}", args.input.display()), e))?;
    let digest = formats::sha256_hex(&raw);
    let observations = formats::read_value_csv(&args.input)?;
    let delta = 1.0 / args.sample_rate_hz;
    let window_len = args.window.to_samples(args.sample_rate_hz)?;
    if observations.len() % window_len != 0 {
        return Err(divisibility_hint(observations.len(), window_len));
    }

    let cfg = &args.fit_cfg;
    let cutoff = cfg.resolve_cutoff_hz(delta);
    let sigma_nu2 = estimate_obs_noise(&observations, delta, cutoff)?;

    let (n_components, j_selection) = match (&args.candidates, args.components) {
        (Some(candidates), _) => {
            let sel = select_j(&observations, delta, window_len, candidates, cfg)?;
            (sel.chosen, Some(sel))
        }
        (None, Some(j)) => (j, None),
        (None, None) => {
            return Err(CliError::Usage(
                "either a component count or a candidate list is required".into(),
            ))
        }
    };

    let (lambda, cv_selection) = match args.lambda.fixed_lambda() {
        Some(l) => (l, None),
        None => {
            let sel = cross_validate_lambda(
                &observations,
                delta,
                window_len,
                n_components,
                &default_lambda_grid(),
                cfg,
            )?;
            (sel.chosen, Some(sel))
        }
    };

    let fit = block_coordinate_fit(&observations, delta, window_len, n_components, lambda, cfg)?;
    let warnings: Vec<String> = fit.warnings.iter().map(|w| w.to_string()).collect();

    let model = FittedModelFile::build(
        &fit.params,
        &fit.psi,
        &fit.trace,
        &warnings,
        digest,
        args.seed,
        args.config_echo.clone(),
    );
    let model_path = args.out_dir.join("fitted_model.json");
    model.write(&model_path)?;

    let report = json!({
        "sigma_nu2": sigma_nu2,
        "cutoff_hz": cutoff,
        "n_components": n_components,
        "aic_by_j": j_selection.as_ref().map(|s| {
            s.aic_by_j
                .iter()
                .map(|(j, a)| (j.to_string(), *a))
                .collect::<std::collections::BTreeMap<_, _>>()
        }),
        "chosen_j": j_selection.as_ref().map(|s| s.chosen),
        "cv_scores": cv_selection.as_ref().map(|s| {
            s.scores
                .iter()
                .map(|(l, v)| CvScoreEntry {
                    lambda: LambdaRepr::from_lambda(*l),
                    score: *v,
                })
                .collect::<Vec<_>>()
        }),
        "chosen_lambda": LambdaRepr::from_lambda(lambda),
        "cv_warnings": cv_selection
            .as_ref()
            .map(|s| s.warnings.iter().map(|w| w.to_string()).collect::<Vec<_>>()),
        "fit_warnings": warnings,
    });
    write_json(&args.out_dir.join("selection_report.json"), &report)?;
    Ok(model_path)
}

pub struct DecomposeArgs {
    pub model: PathBuf,
    pub input: PathBuf,
    pub out_dir: PathBuf,
}

pub fn cmd_decompose(args: &DecomposeArgs) -> Result<()> {
    let model = FittedModelFile::read(&args.model)?;
    let params = model.to_params()?;
    let psi = model.to_field()?;
    let observations = formats::read_value_csv(&args.input)?;
    if observations.len() != psi.n_samples() {
        return Err(CliError::Data(format!(
            "model was fit on {} samples but the record has {}",
            psi.n_samples(),
            observations.len()
        )));
    }

    let post = kalman_smooth(&observations, &params, &psi)?;
    let delta = params.delta;
    for j in 0..params.n_components() {
        let band = reconstruct_component(&post, j);
        let header = vec![
            "k".to_string(),
            "time_s".to_string(),
            "mean".to_string(),
            "ci_lower".to_string(),
            "ci_upper".to_string(),
        ];
        let rows: Vec<Vec<f64>> = (0..observations.len())
            .map(|k| {
                vec![
                    k as f64,
                    k as f64 * delta,
                    band.mean[k],
                    band.lower[k],
                    band.upper[k],
                ]
            })
            .collect();
        write_table_csv(
            &args.out_dir.join(format!("component_{}.csv", j + 1)),
            &header,
            &rows,
        )?;
    }

    // Spectrogram in dB: rows are windows, columns the DFT grid in Hz.
    let n = psi.window_len();
    let mut header = vec!["window".to_string()];
    let mut freqs_hz = Vec::with_capacity(n);
    for i in 0..n {
        let hz = i as f64 / (n as f64 * delta);
        freqs_hz.push(hz);
        header.push(format!("{hz}"));
    }
    let mut rows = Vec::with_capacity(psi.n_windows());
    for m in 0..psi.n_windows() {
        let grid = psd(&params, &psi.window(m), n)?;
        let mut row = Vec::with_capacity(n + 1);
        row.push(m as f64);
        for v in &grid.total {
            row.push(10.0 * v.log10());
        }
        rows.push(row);
    }
    write_table_csv(&args.out_dir.join("spectrogram.csv"), &header, &rows)
}

pub struct SampleArgs {
    pub model: PathBuf,
    pub input: PathBuf,
    pub out_dir: PathBuf,
    pub draws: usize,
    pub seed: u64,
    pub level: f64,
}

pub fn cmd_sample(args: &SampleArgs) -> Result<()> {
    let model = FittedModelFile::read(&args.model)?;
    let params = model.to_params()?;
    let psi = model.to_field()?;
    let observations = formats::read_value_csv(&args.input)?;
    if observations.len() != psi.n_samples() {
        return Err(CliError::Data(format!(
            "model was fit on {} samples but the record has {}",
            psi.n_samples(),
            observations.len()
        )));
    }

    let ens = ffbs_sample(&observations, &params, &psi, args.draws, args.seed)?;
    let delta = params.delta;
    let n_comp = params.n_components();
    let k_total = observations.len();

    let mut header = vec!["k".to_string(), "time_s".to_string()];
    for j in 0..n_comp {
        header.push(format!("mean_{}", j + 1));
        header.push(format!("var_{}", j + 1));
    }
    let mut rows = Vec::with_capacity(k_total);
    for k in 0..k_total {
        let mut row = vec![k as f64, k as f64 * delta];
        for j in 0..n_comp {
            let mut mean = 0.0;
            for s in 0..args.draws {
                mean += ens.samples[[s, k, 2 * j]];
            }
            mean /= args.draws as f64;
            let mut var = 0.0;
            for s in 0..args.draws {
                var += (ens.samples[[s, k, 2 * j]] - mean).powi(2);
            }
            var /= (args.draws.max(2) - 1) as f64;
            row.push(mean);
            row.push(var);
        }
        rows.push(row);
    }
    write_table_csv(&args.out_dir.join("samples_summary.csv"), &header, &rows)?;

    // Phase files need enough draws for stable quantiles.
    if args.draws >= PHASE_DRAW_FLOOR {
        for j in 0..n_comp {
            let est = phase_estimate(&ens, j, args.level, PHASE_DRAW_FLOOR)?;
            let header = vec![
                "k".to_string(),
                "time_s".to_string(),
                "mean".to_string(),
                "lower".to_string(),
                "upper".to_string(),
                "degenerate".to_string(),
            ];
            let rows: Vec<Vec<f64>> = (0..k_total)
                .map(|k| {
                    vec![
                        k as f64,
                        k as f64 * delta,
                        est.mean[k],
                        est.lower[k],
                        est.upper[k],
                        if est.degenerate[k] { 1.0 } else { 0.0 },
                    ]
                })
                .collect();
            write_table_csv(
                &args.out_dir.join(format!("phase_{}.csv", j + 1)),
                &header,
                &rows,
            )?;
        }
    } else {
        eprintln!(
            "note: {} draws < {PHASE_DRAW_FLOOR}; phase quantiles were not written",
            args.draws
        );
    }
    Ok(())
}

pub struct BenchArgs {
    pub out_dir: PathBuf,
    pub realizations: usize,
    pub seed_base: u64,
    pub window: WindowSpec,
    pub modes: Vec<LambdaMode>,
    pub sim: SimSpec,
    pub fit_cfg: FitConfig,
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let seeds: Vec<u64> = (0..args.realizations as u64)
        .map(|i| args.seed_base + i)
        .collect();
    let window_len = args.window.to_samples(args.sim.sample_rate_hz)?;
    let report = run_benchmark(&args.sim, &seeds, window_len, &args.modes, &args.fit_cfg)?;

    let header = vec![
        "model".to_string(),
        "jump_1".to_string(),
        "jump_2".to_string(),
        "mse_1".to_string(),
        "mse_2".to_string(),
        "is_div".to_string(),
    ];
    let mut body = String::new();
    body.push_str(&header.join(","));
    body.push('\n');
    body.push_str(&format!(
        "truth,{},{},0,0,0\n",
        report.truth_jump[0], report.truth_jump[1]
    ));
    let mut total_runtime = 0.0;
    for row in &report.rows {
        body.push_str(&format!(
            "lambda={},{},{},{},{},{}\n",
            row.mode.label(),
            row.metrics.jump[0],
            row.metrics.jump[1],
            row.metrics.mse[0],
            row.metrics.mse[1],
            row.metrics.is_div
        ));
        total_runtime += row.metrics.runtime_seconds;
    }
    write_atomic(&args.out_dir.join("bench.csv"), body.as_bytes())?;

    let json_report = json!({
        "seeds": report.seeds,
        "window_len": report.window_len,
        "truth": {"jump": report.truth_jump, "mse": [0.0, 0.0], "is_div": 0.0},
        "rows": report
            .rows
            .iter()
            .map(|row| {
                json!({
                    "mode": row.mode.label(),
                    "jump": row.metrics.jump,
                    "mse": row.metrics.mse,
                    "is_div": row.metrics.is_div,
                    "chosen_lambdas": row
                        .chosen_lambdas
                        .iter()
                        .map(|l| LambdaRepr::from_lambda(*l))
                        .collect::<Vec<_>>(),
                })
            })
            .collect::<Vec<_>>(),
    });
    write_json(&args.out_dir.join("bench.json"), &json_report)?;
    eprintln!("benchmark fits took {total_runtime:.1}s");
    Ok(())
}
