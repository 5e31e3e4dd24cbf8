//! Run configuration: a JSON file and/or command-line flags, with flags
//! taking precedence over the file.

use plso::{ApgConfig, FitConfig, Lambda};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

/// Window length given either in seconds or directly in samples.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum WindowSpec {
    Seconds(f64),
    Samples(usize),
}

impl WindowSpec {
    pub fn to_samples(self, sample_rate_hz: f64) -> Result<usize> {
        let n = match self {
            WindowSpec::Samples(n) => n,
            WindowSpec::Seconds(s) => {
                if !(s.is_finite() && s > 0.0) {
                    return Err(CliError::Usage(format!("window length {s} s is not positive")));
                }
                (s * sample_rate_hz).round() as usize
            }
        };
        if n < 2 {
            return Err(CliError::Usage(format!(
                "window of {n} samples is too short (need at least 2)"
            )));
        }
        Ok(n)
    }
}

/// Smoothness-weight mode: exactly one of a fixed value, cross-validation,
/// or the stationary limit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LambdaChoice {
    Fixed { value: f64 },
    Cv,
    Stationary,
}

impl LambdaChoice {
    pub fn fixed_lambda(&self) -> Option<Lambda> {
        match self {
            LambdaChoice::Fixed { value } => Some(Lambda::Value(*value)),
            LambdaChoice::Stationary => Some(Lambda::Stationary),
            LambdaChoice::Cv => None,
        }
    }
}

/// Optimizer knobs; unset fields keep their defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerOverrides {
    pub max_iters: Option<usize>,
    pub sufficient_decrease: Option<f64>,
    pub shrink: Option<f64>,
    pub max_backtracks: Option<usize>,
    pub tol: Option<f64>,
    pub log_power_bound: Option<f64>,
    pub initial_step: Option<f64>,
    pub outer_iters: Option<usize>,
    pub prominence_threshold: Option<f64>,
    pub lengthscale_fraction: Option<f64>,
    pub max_lengthscale: Option<f64>,
    pub refine_max_iters: Option<usize>,
    pub refit_theta: Option<bool>,
}

impl OptimizerOverrides {
    pub fn apply(&self, cfg: &mut FitConfig) {
        let apg: &mut ApgConfig = &mut cfg.apg;
        if let Some(v) = self.max_iters {
            apg.max_iters = v;
        }
        if let Some(v) = self.sufficient_decrease {
            apg.sufficient_decrease = v;
        }
        if let Some(v) = self.shrink {
            apg.shrink = v;
        }
        if let Some(v) = self.max_backtracks {
            apg.max_backtracks = v;
        }
        if let Some(v) = self.tol {
            apg.tol = v;
        }
        if let Some(v) = self.log_power_bound {
            apg.log_power_bound = v;
        }
        if let Some(v) = self.initial_step {
            apg.initial_step = v;
        }
        if let Some(v) = self.outer_iters {
            cfg.outer_iters = v;
        }
        if let Some(v) = self.prominence_threshold {
            cfg.prominence_threshold = v;
        }
        if let Some(v) = self.lengthscale_fraction {
            cfg.lengthscale_fraction = v;
        }
        if let Some(v) = self.max_lengthscale {
            cfg.max_lengthscale = Some(v);
        }
        if let Some(v) = self.refine_max_iters {
            cfg.refine_max_iters = v;
        }
        if let Some(v) = self.refit_theta {
            cfg.refit_theta = v;
        }
    }
}

/// Overrides for the modulated-pair simulation recipe.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimOverrides {
    pub slow_freq_hz: Option<f64>,
    pub center_freqs_hz: Option<[f64; 2]>,
    pub lengthscales_s: Option<[f64; 2]>,
    pub sample_rate_hz: Option<f64>,
    pub duration_s: Option<f64>,
    pub noise_var: Option<f64>,
    pub amplitude: Option<f64>,
}

impl SimOverrides {
    pub fn apply(&self, spec: &mut plso::SimSpec) {
        if let Some(v) = self.slow_freq_hz {
            spec.slow_freq_hz = v;
        }
        if let Some(v) = self.center_freqs_hz {
            spec.center_freqs_hz = v;
        }
        if let Some(v) = self.lengthscales_s {
            spec.lengthscales_s = v;
        }
        if let Some(v) = self.sample_rate_hz {
            spec.sample_rate_hz = v;
        }
        if let Some(v) = self.duration_s {
            spec.duration_s = v;
        }
        if let Some(v) = self.noise_var {
            spec.noise_var = v;
        }
        if let Some(v) = self.amplitude {
            spec.amplitude = v;
        }
    }
}

/// A fully custom generative recipe for `simulate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenericSim {
    pub sample_rate_hz: f64,
    pub obs_noise_var: f64,
    pub lengthscales_s: Vec<f64>,
    pub center_freqs_hz: Vec<f64>,
    pub window_len: usize,
    /// J x M log powers.
    pub log_powers: Vec<Vec<f64>>,
}

/// Benchmark settings.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchOverrides {
    pub realizations: Option<usize>,
    pub seed_base: Option<u64>,
    pub window: Option<WindowSpec>,
    /// Subset of "zero", "cv", "stationary".
    pub modes: Option<Vec<String>>,
}

/// The JSON config file. Every field is optional; flags override.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub sample_rate_hz: Option<f64>,
    pub window: Option<WindowSpec>,
    pub components: Option<usize>,
    pub candidates: Option<Vec<usize>>,
    pub lambda: Option<LambdaChoice>,
    pub cutoff_hz: Option<f64>,
    pub draws: Option<usize>,
    pub seed: Option<u64>,
    pub optimizer: Option<OptimizerOverrides>,
    pub freeze_center_freqs: Option<Vec<usize>>,
    pub sim: Option<SimOverrides>,
    pub generic_sim: Option<GenericSim>,
    pub bench: Option<BenchOverrides>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path)
            .map_err(|e| CliError::io(&format!("reading config {}", path.display()), e))?;
        serde_json::from_str(&body)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn load_opt(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(ConfigFile::default()),
        }
    }

    /// Fit-pipeline settings with overrides applied.
    pub fn fit_config(&self, cutoff_flag: Option<f64>, freeze_flag: &[usize]) -> FitConfig {
        let mut cfg = FitConfig::default();
        if let Some(opt) = &self.optimizer {
            opt.apply(&mut cfg);
        }
        if let Some(c) = self.cutoff_hz {
            cfg.cutoff_hz = Some(c);
        }
        if let Some(c) = cutoff_flag {
            cfg.cutoff_hz = Some(c);
        }
        if let Some(freeze) = &self.freeze_center_freqs {
            cfg.freeze_center_freqs = freeze.clone();
        }
        if !freeze_flag.is_empty() {
            cfg.freeze_center_freqs = freeze_flag.to_vec();
        }
        cfg
    }
}

/// Echo of the resolved settings stored in output manifests.
pub fn config_echo(value: impl Serialize) -> serde_json::Value {
    serde_json::to_value(value).unwrap_or(serde_json::Value::Null)
}
