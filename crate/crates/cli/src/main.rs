//! Command-line front end: reproduce the study's figure and table pipelines,
//! or scan a metric over parameter grids, emitting CSV data plus a JSON run
//! manifest.

mod config;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{RunConfig, EXPERIMENTS};

/// Errors split by exit code: configuration problems exit 1, numerical or
/// I/O failures during a run exit 2.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Numerical(msg) => write!(f, "run failed: {msg}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "zzest", version, about = "Coupling-strength estimation experiments for a dissipative two-qubit pair")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one of the named experiment pipelines.
    Reproduce {
        /// One of: fig1 fig2 fig3a fig3b fig4a fig4b fig5a fig5b fig6a fig6b
        /// fig7a fig7b fig9 table1 custom
        experiment: String,
        /// JSON config file (same keys as --set).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override one config key, e.g. --set gamma=0.1 (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// RNG seed; required for fig9 and table1.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: config out_dir, then $ZZEST_OUT_DIR,
        /// then ./runs/<experiment>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a metric over a 1- or 2-axis parameter grid.
    Scan {
        /// Axis spec name=start:stop:count with name in {t, lambda, eta, g}.
        #[arg(long = "axis", value_name = "SPEC", required = true)]
        axes: Vec<String>,
        /// Metric: qfi (at time t or T) or fmax (peak over the time grid).
        #[arg(long)]
        metric: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Usage problems are configuration errors: exit 1, not clap's 2.
            let _ = err.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            match err {
                CliError::Config(_) => ExitCode::from(1),
                CliError::Numerical(_) => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Reproduce { experiment, config, set, seed, out } => {
            if !EXPERIMENTS.contains(&experiment.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown experiment '{experiment}'; expected one of {}",
                    EXPERIMENTS.join(", ")
                )));
            }
            let cfg = resolve_config(config.as_deref(), &set, seed, Some(&experiment))?;
            let dir = resolve_out_dir(&out, &cfg, &experiment);
            let start = Instant::now();
            let tables = experiments::run_experiment(&experiment, &cfg)?;
            let files =
                output::write_outputs(&dir, &experiment, &cfg, &tables, start.elapsed().as_secs_f64())?;
            for file in files {
                println!("wrote {}", file.display());
            }
            Ok(())
        }
        Command::Scan { axes, metric, config, set, seed, out } => {
            let cfg = resolve_config(config.as_deref(), &set, seed, None)?;
            let parsed: Vec<experiments::Axis> =
                axes.iter().map(|a| experiments::parse_axis(a)).collect::<Result<_, _>>()?;
            let dir = resolve_out_dir(&out, &cfg, "scan");
            let start = Instant::now();
            let tables = experiments::run_scan(&parsed, &metric, &cfg)?;
            let files =
                output::write_outputs(&dir, "scan", &cfg, &tables, start.elapsed().as_secs_f64())?;
            for file in files {
                println!("wrote {}", file.display());
            }
            Ok(())
        }
    }
}

fn resolve_config(
    path: Option<&std::path::Path>,
    sets: &[String],
    seed: Option<u64>,
    experiment: Option<&str>,
) -> Result<RunConfig, CliError> {
    let mut cfg = match path {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for spec in sets {
        cfg.apply_set(spec)?;
    }
    if let Some(seed) = seed {
        cfg.seed = Some(seed);
    }
    if let Some(experiment) = experiment {
        cfg.experiment = Some(experiment.to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_out_dir(flag: &Option<PathBuf>, cfg: &RunConfig, fallback: &str) -> PathBuf {
    if let Some(dir) = flag {
        return dir.clone();
    }
    if let Some(dir) = &cfg.out_dir {
        return PathBuf::from(dir);
    }
    if let Ok(dir) = std::env::var("ZZEST_OUT_DIR") {
        return PathBuf::from(dir).join(fallback);
    }
    PathBuf::from("runs").join(fallback)
}
