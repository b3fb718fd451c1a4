use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use mbent_cli::{run, ConfigError, ExperimentConfig, ExperimentKind, RunOptions};

/// Exit status when a theorem or bound violation was found.
const EXIT_VIOLATION: u8 = 2;
/// Exit status for unreadable or invalid configuration.
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "mbent", version, about = "Many-body entanglement experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Largest sector dimension diagonalized densely.
    #[arg(long, global = true)]
    dense_cap: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Ground-state entropies along a parameter sweep.
    GsSweep,
    /// Entropy trajectories from Slater-determinant starts.
    Dynamics,
    /// Seeded ensemble statistics along a sweep.
    Ensemble,
    /// Ground-state maximal-entanglement check over random draws.
    TheoremCheck,
    /// Hölder lower bounds on interaction norms.
    Bounds,
    /// Symmetry-refined entropy bounds.
    RefinedBounds,
}

impl From<Command> for ExperimentKind {
    fn from(c: Command) -> Self {
        match c {
            Command::GsSweep => ExperimentKind::GsSweep,
            Command::Dynamics => ExperimentKind::Dynamics,
            Command::Ensemble => ExperimentKind::Ensemble,
            Command::TheoremCheck => ExperimentKind::TheoremCheck,
            Command::Bounds => ExperimentKind::Bounds,
            Command::RefinedBounds => ExperimentKind::RefinedBounds,
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<ExitCode> {
    let kind = ExperimentKind::from(cli.command);
    let config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::new(format!("reading {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => return Err(ConfigError::new("--config is required").into()),
    };
    let opts = RunOptions {
        out: cli.out.clone(),
        seed: cli.seed,
        jobs: cli.jobs,
        dense_cap: cli.dense_cap,
    };
    let outcome = run(kind, &config, &opts).context(kind.name())?;
    for f in outcome.failures() {
        eprintln!("failed: {f}");
    }
    println!(
        "{}: {} files in {}, {} failures, {} violations",
        kind.name(),
        outcome.manifest.files.len(),
        outcome.out.display(),
        outcome.failures().len(),
        outcome.violations
    );
    Ok(if outcome.violations > 0 {
        ExitCode::from(EXIT_VIOLATION)
    } else {
        ExitCode::SUCCESS
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<ConfigError>()) {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
