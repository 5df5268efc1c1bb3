use clap::{Args, Parser, Subcommand};
use lrfit_cli::{cmd_diagnose, cmd_filter, cmd_fit, cmd_predict, cmd_run, cmd_synth, one_line, Overrides, RunConfig};
use lrfit_core::dataset::SyntheticConfig;
use lrfit_core::{Error, Result};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lrfit", version, about = "Regression correction of Longley-Rice predictions from field measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Measurement CSV (query rows for `predict`).
    #[arg(long)]
    input: Option<PathBuf>,
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Thermal-noise band `LOW:HIGH` in dB, or `off`.
    #[arg(long, allow_hyphen_values = true)]
    noise_band: Option<String>,
    /// Holdout rows for validation.
    #[arg(long)]
    holdout: Option<usize>,
    /// Comma-separated preset names.
    #[arg(long, value_delimiter = ',')]
    presets: Option<Vec<String>>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Suppress the summary line.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Drop thermal-noise rows and write the filtered table and log.
    Filter(Common),
    /// Fit every preset by OLS and LAR.
    Fit(Common),
    /// Assumption checklists and CDF tables.
    Diagnose(Common),
    /// The full pipeline in one report.
    Run(Common),
    /// Predict p_rx with a saved model.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
    },
    /// Write a synthetic dataset.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 500)]
        rows: usize,
        /// Planted A,B,C,D,E.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        coefficients: Option<Vec<f64>>,
        /// Gaussian noise on p_rx, dB.
        #[arg(long, default_value_t = 0.0)]
        noise_sd: f64,
        /// Output CSV; defaults to `synthetic.csv` in the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn config(c: &Common) -> Result<RunConfig> {
    let cfg = RunConfig::load(c.config.as_deref()).map_err(|e| e.at("config"))?;
    Ok(cfg.apply(Overrides {
        input: c.input.clone(),
        output_dir: c.output_dir.clone(),
        seed: c.seed,
        noise_band: c.noise_band.clone(),
        holdout: c.holdout,
        presets: c.presets.clone(),
        alpha: c.alpha,
    }))
}

fn dispatch(command: Command) -> Result<(bool, String)> {
    match command {
        Command::Filter(c) => Ok((c.quiet, cmd_filter(&config(&c)?)?)),
        Command::Fit(c) => Ok((c.quiet, cmd_fit(&config(&c)?)?)),
        Command::Diagnose(c) => Ok((c.quiet, cmd_diagnose(&config(&c)?)?)),
        Command::Run(c) => Ok((c.quiet, cmd_run(&config(&c)?)?)),
        Command::Predict { common, model } => Ok((common.quiet, cmd_predict(&config(&common)?, &model)?)),
        Command::Synth { common, rows, coefficients, noise_sd, output } => {
            let cfg = config(&common)?;
            let mut synth = SyntheticConfig { rows, noise_sd_db: noise_sd, seed: cfg.seed, ..Default::default() };
            if let Some(c) = coefficients {
                synth.coefficients = c.try_into().map_err(|c: Vec<f64>| {
                    Error::InvalidValue(format!("--coefficients needs 5 values, got {}", c.len())).at("synth")
                })?;
            }
            let path = output.unwrap_or_else(|| cfg.output_dir.join("synthetic.csv"));
            Ok((common.quiet, cmd_synth(&synth, &path)?))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: usage: {}", one_line(first.trim_start_matches("error:")));
            return ExitCode::from(2);
        }
    };
    match dispatch(cli.command) {
        Ok((quiet, summary)) => {
            if !quiet {
                println!("{summary}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
