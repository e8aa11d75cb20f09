use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dcmm_cli::commands::{
    cmd_evaluate, cmd_fit, cmd_forecast, cmd_multiscale, cmd_simulate,
};
use dcmm_cli::config::RunConfig;
use dcmm_cli::errors::{CliError, Result};

/// Batch forecasting for non-negative count time series: Bernoulli and
/// shifted-Poisson state-space components with discount evolution,
/// random-effect over-dispersion, and an optional multi-scale shared
/// factor.
#[derive(Parser)]
#[command(name = "dcmm", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter every series over its history and write a checkpoint.
    Fit {
        /// CSV with columns series_id,date,count[,covariate...].
        #[arg(long)]
        data: PathBuf,
        /// JSON run configuration; omitted means shipped defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (beats DCMM_THREADS and the config value).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Sample forecast paths from a checkpoint.
    Forecast {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Future covariates (series_id,date,covariate...), required when
        /// the checkpoint was fitted with covariates.
        #[arg(long)]
        future: Option<PathBuf>,
        /// Factor-draw CSV; conditions each path on a drawn factor
        /// trajectory (models must carry the factor regression).
        #[arg(long)]
        factor_draws: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Score forecast-sample files against realized counts.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Forecast-sample CSV; repeatable.
        #[arg(long = "forecast", required = true)]
        forecasts: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate synthetic count data with a shared weekly factor.
    Simulate {
        /// JSON generator configuration; omitted means defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rolling comparison of standalone models against shared-factor
    /// models with recoupled updates.
    Multiscale {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit { data, config, out_dir, seed, threads } => {
            let cfg = load_config(&config)?;
            cmd_fit(&data, &cfg, &out_dir, seed, threads)?;
            Ok(())
        }
        Command::Forecast { checkpoint, config, future, factor_draws, out_dir, seed, threads } => {
            let cfg = load_config(&config)?;
            cmd_forecast(
                &checkpoint,
                &cfg,
                future.as_deref(),
                factor_draws.as_deref(),
                &out_dir,
                seed,
                threads,
            )
        }
        Command::Evaluate { data, config, forecasts, out_dir, seed } => {
            let cfg = load_config(&config)?;
            cmd_evaluate(&data, &cfg, &forecasts, &out_dir, seed)
        }
        Command::Simulate { config, out_dir, seed } => {
            let cfg = match &config {
                Some(p) => dcmm_cli::commands::SimulateConfig::load(p)?,
                None => dcmm_cli::commands::SimulateConfig::default(),
            };
            cmd_simulate(&cfg, &out_dir, seed)
        }
        Command::Multiscale { data, config, out_dir, seed, threads } => {
            let cfg = load_config(&config)?;
            cmd_multiscale(&data, &cfg, &out_dir, seed, threads)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Input(_) => ExitCode::from(2),
                CliError::Numerical(_) => ExitCode::from(3),
            }
        }
    }
}
