use clap::{Args, Parser, Subcommand};
use plso::LambdaMode;
use plso_cli::commands::{
    cmd_bench, cmd_decompose, cmd_fit, cmd_sample, cmd_simulate, BenchArgs, DecomposeArgs, FitArgs,
    SampleArgs, SimulateArgs,
};
use plso_cli::config::{config_echo, ConfigFile, LambdaChoice, WindowSpec};
use plso_cli::error::{CliError, Result};
use std::path::PathBuf;
use std::process::ExitCode;

/// Oscillatory decomposition of nonstationary time series.
#[derive(Parser)]
#[command(name = "plso", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with known ground truth.
    Simulate(SimulateCli),
    /// Fit the model to a CSV record.
    Fit(FitCli),
    /// Smooth a record under a fitted model and export trajectories and the
    /// spectrogram.
    Decompose(DecomposeCli),
    /// Draw posterior trajectories and phase estimates.
    Sample(SampleCli),
    /// Run the simulation benchmark table.
    Bench(BenchCli),
}

#[derive(Args)]
struct SimulateCli {
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON config file (flags override it).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct FitCli {
    /// Input CSV (header `value`, one float per row).
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Sampling rate in Hz.
    #[arg(long, value_name = "HZ")]
    sample_rate: Option<f64>,
    /// Window length in seconds.
    #[arg(long, value_name = "SECONDS", conflicts_with = "window_samples")]
    window_sec: Option<f64>,
    /// Window length in samples.
    #[arg(long, value_name = "N")]
    window_samples: Option<usize>,
    /// Number of oscillatory components.
    #[arg(long, conflicts_with = "candidates")]
    components: Option<usize>,
    /// Candidate component counts for AIC selection, comma separated.
    #[arg(long, value_delimiter = ',')]
    candidates: Option<Vec<usize>>,
    /// Fixed smoothness weight.
    #[arg(long, value_name = "VALUE")]
    lambda: Option<f64>,
    /// Choose the smoothness weight by even/odd cross-validation.
    #[arg(long, conflicts_with = "lambda")]
    lambda_cv: bool,
    /// Stationary fit: one power per component across all windows.
    #[arg(long, conflicts_with_all = ["lambda", "lambda_cv"])]
    stationary: bool,
    /// Noise-floor cutoff in Hz.
    #[arg(long, value_name = "HZ")]
    cutoff_hz: Option<f64>,
    /// Component indices whose center frequencies stay fixed.
    #[arg(long, value_delimiter = ',')]
    freeze: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DecomposeCli {
    /// Fitted model JSON.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct SampleCli {
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Number of posterior draws.
    #[arg(long, default_value_t = 200)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Credible level for phase intervals.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

#[derive(Args)]
struct BenchCli {
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Number of simulated realizations.
    #[arg(long)]
    realizations: Option<usize>,
    /// First seed; realization i uses seed_base + i.
    #[arg(long)]
    seed_base: Option<u64>,
    /// Window length in seconds.
    #[arg(long, value_name = "SECONDS")]
    window_sec: Option<f64>,
    /// Comma-separated subset of zero,cv,stationary.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<String>>,
    #[arg(long, value_name = "HZ")]
    cutoff_hz: Option<f64>,
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

fn parse_modes(names: &[String]) -> Result<Vec<LambdaMode>> {
    let mut modes = Vec::new();
    for name in names {
        let mode = match name.as_str() {
            "zero" => LambdaMode::Zero,
            "cv" => LambdaMode::CrossValidated,
            "stationary" => LambdaMode::Stationary,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown mode '{other}' (expected zero, cv or stationary)"
                )))
            }
        };
        if !modes.contains(&mode) {
            modes.push(mode);
        }
    }
    if modes.is_empty() {
        return Err(CliError::Usage("at least one benchmark mode required".into()));
    }
    Ok(modes)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let config = ConfigFile::load_opt(args.config.as_deref())?;
            let seed = config.seed.map_or(args.seed, |s| if args.seed != 0 { args.seed } else { s });
            cmd_simulate(&SimulateArgs {
                out_dir: args.out,
                seed,
                config,
            })
        }
        Command::Fit(args) => {
            let config = ConfigFile::load_opt(args.config.as_deref())?;
            let input = args
                .input
                .clone()
                .or_else(|| config.input.clone())
                .ok_or_else(|| CliError::Usage("an input CSV is required".into()))?;
            let out_dir = args
                .out
                .clone()
                .or_else(|| config.out_dir.clone())
                .ok_or_else(|| CliError::Usage("an output directory is required".into()))?;
            let sample_rate = args
                .sample_rate
                .or(config.sample_rate_hz)
                .ok_or_else(|| CliError::Usage("the sampling rate is required".into()))?;
            if !(sample_rate.is_finite() && sample_rate > 0.0) {
                return Err(CliError::Usage(format!(
                    "sampling rate must be positive, got {sample_rate}"
                )));
            }
            let window = match (args.window_sec, args.window_samples) {
                (Some(s), None) => WindowSpec::Seconds(s),
                (None, Some(n)) => WindowSpec::Samples(n),
                (None, None) => config.window.ok_or_else(|| {
                    CliError::Usage("a window length (seconds or samples) is required".into())
                })?,
                (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
            };
            let lambda = match (args.lambda, args.lambda_cv, args.stationary) {
                (Some(v), false, false) => LambdaChoice::Fixed { value: v },
                (None, true, false) => LambdaChoice::Cv,
                (None, false, true) => LambdaChoice::Stationary,
                (None, false, false) => config.lambda.ok_or_else(|| {
                    CliError::Usage(
                        "a smoothness mode is required: --lambda VALUE, --lambda-cv or --stationary"
                            .into(),
                    )
                })?,
                _ => unreachable!("clap conflicts_with"),
            };
            let components = args.components.or(config.components);
            let candidates = args.candidates.clone().or_else(|| config.candidates.clone());
            if components.is_none() && candidates.is_none() {
                return Err(CliError::Usage(
                    "either --components or --candidates is required".into(),
                ));
            }
            let seed = if args.seed != 0 {
                args.seed
            } else {
                config.seed.unwrap_or(0)
            };
            let fit_cfg = config.fit_config(args.cutoff_hz, &args.freeze);
            let resolved = serde_json::json!({
                "input": input,
                "out_dir": out_dir,
                "sample_rate_hz": sample_rate,
                "window": config_echo(window),
                "components": components,
                "candidates": candidates,
                "lambda": config_echo(lambda),
                "cutoff_hz": fit_cfg.cutoff_hz,
                "seed": seed,
                "freeze_center_freqs": fit_cfg.freeze_center_freqs,
            });
            cmd_fit(&FitArgs {
                input,
                out_dir,
                sample_rate_hz: sample_rate,
                window,
                components,
                candidates,
                lambda,
                seed,
                fit_cfg,
                config_echo: resolved,
            })
            .map(|_| ())
        }
        Command::Decompose(args) => cmd_decompose(&DecomposeArgs {
            model: args.model,
            input: args.input,
            out_dir: args.out,
        }),
        Command::Sample(args) => {
            if args.draws == 0 {
                return Err(CliError::Usage("at least one draw is required".into()));
            }
            cmd_sample(&SampleArgs {
                model: args.model,
                input: args.input,
                out_dir: args.out,
                draws: args.draws,
                seed: args.seed,
                level: args.level,
            })
        }
        Command::Bench(args) => {
            let config = ConfigFile::load_opt(args.config.as_deref())?;
            let bench = config.bench.clone().unwrap_or_default();
            let realizations = args.realizations.or(bench.realizations).unwrap_or(20);
            if realizations == 0 {
                return Err(CliError::Usage("at least one realization is required".into()));
            }
            let seed_base = args.seed_base.or(bench.seed_base).unwrap_or(1);
            let window = match args.window_sec {
                Some(s) => WindowSpec::Seconds(s),
                None => bench.window.unwrap_or(WindowSpec::Seconds(2.0)),
            };
            let modes = match &args.modes {
                Some(names) => parse_modes(names)?,
                None => match &bench.modes {
                    Some(names) => parse_modes(names)?,
                    None => vec![
                        LambdaMode::Zero,
                        LambdaMode::CrossValidated,
                        LambdaMode::Stationary,
                    ],
                },
            };
            let mut sim = plso::SimSpec::default();
            if let Some(overrides) = &config.sim {
                overrides.apply(&mut sim);
            }
            let fit_cfg = config.fit_config(args.cutoff_hz, &[]);
            cmd_bench(&BenchArgs {
                out_dir: args.out,
                realizations,
                seed_base,
                window,
                modes,
                sim,
                fit_cfg,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("plso: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
