//! `qsim`: scenario runner for the neutral-atom simulator.

mod artifacts;
mod config;
mod error;
mod fit_cmd;
mod optimize;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{Overrides, ScenarioConfig};
use error::CliResult;

#[derive(Parser)]
#[command(name = "qsim", version, about = "Analog neutral-atom simulation, fitting and pulse optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Sweep points evolved concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Base seed for shot sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Exact outcome probabilities instead of shots.
    #[arg(long, conflicts_with = "shots")]
    exact: bool,
    /// Shots per sweep point.
    #[arg(long)]
    shots: Option<u64>,
    /// Enable readout mitigation, optionally with the error rate ε.
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "0.05", value_name = "EPS")]
    mitigate: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            exact: self.exact,
            shots: self.shots,
            mitigate: self.mitigate,
            out: self.out.clone(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FitModel {
    /// `C + A sin(ωt + φ) e^{−t/τ}`.
    DampedSine,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifact directory.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a CSV with columns t, p, sigma.
    Fit {
        csv: PathBuf,
        #[arg(long, value_enum, default_value = "damped-sine")]
        model: FitModel,
        #[arg(long, default_value = "qsim_fit")]
        out: PathBuf,
    },
    /// Optimize the detuning schedule for the config's target pattern.
    Optimize {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Check a config's registers and schedules against the device profile.
    Validate { config: PathBuf },
}

fn load(path: &Path, common: Option<&Common>) -> CliResult<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(c) = common {
        cfg.apply(&c.overrides());
    }
    Ok(cfg)
}

fn validate(path: &Path) -> CliResult<()> {
    let cfg = load(path, None)?;
    let prep = run::prepare(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&prep.report)?);
    run::reject_invalid(&prep.report)
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { config, common } => run::run(&load(&config, Some(&common))?, common.jobs),
        Command::Optimize { config, common } => optimize::optimize(&load(&config, Some(&common))?, common.jobs),
        Command::Fit { csv, model, out } => {
            let name = match model {
                FitModel::DampedSine => "damped_sine",
            };
            fit_cmd::fit(&csv, name, &out)
        }
        Command::Validate { config } => validate(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

