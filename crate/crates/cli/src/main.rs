#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;
mod runner;
mod scenario;

use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, CliResult};
use crate::runner::{execute, summary, Outcome};
use crate::scenario::{Mode, Scenario};

/// Density steering experiments for reflected diffusions on [0, 1].
///
/// Outputs go to `$FPSTEER_OUT/<scenario name>/` (default root: `fpsteer-out`).
/// Exit status: 0 when every audit passes, 1 on audit or numerical failure,
/// 2 when the scenario cannot be parsed or validated.
#[derive(Debug, Parser)]
#[command(name = "fpsteer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the scenario in the mode named by its `mode` field.
    Run { config: PathBuf },
    /// Eigenvalues of the weighted operator for the scenario's target.
    Spectrum { config: PathBuf },
    /// Particle simulation under the stabilizing drift, compared with the PDE.
    Particles(ParticleArgs),
    /// Self-convergence study over the scenario's `levels`.
    Convergence { config: PathBuf },
    /// Steer, then replay the recorded drift through the open-loop solver.
    Replay { config: PathBuf },
}

#[derive(Debug, Args)]
struct ParticleArgs {
    config: PathBuf,
    /// Number of particles.
    #[arg(long)]
    n: Option<usize>,
    /// Euler-Maruyama step.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated snapshot times.
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<f64>>,
}

fn output_root() -> PathBuf {
    env::var_os("FPSTEER_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("fpsteer-out"))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn write_outcome(dir: &Path, outcome: &Outcome) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    for (name, bytes) in &outcome.files {
        write_file(&dir.join(name), bytes)?;
    }
    let mut metrics = serde_json::to_vec_pretty(&outcome.metrics).expect("metrics serialize");
    metrics.push(b'\n');
    write_file(&dir.join("metrics.json"), &metrics)?;
    write_file(
        &dir.join("summary.txt"),
        summary(&outcome.metrics).as_bytes(),
    )
}

fn run(cli: Cli) -> CliResult<bool> {
    let (config, mode, overrides) = match cli.command {
        Command::Run { config } => (config, None, None),
        Command::Spectrum { config } => (config, Some(Mode::Spectrum), None),
        Command::Convergence { config } => (config, Some(Mode::Convergence), None),
        Command::Replay { config } => (config, Some(Mode::Replay), None),
        Command::Particles(args) => {
            let config = args.config.clone();
            (config, Some(Mode::Particles), Some(args))
        }
    };
    let mut scenario = Scenario::load(&config)?;
    if let Some(args) = overrides {
        let p = &mut scenario.particles;
        p.count = args.n.unwrap_or(p.count);
        p.dt = args.dt.or(p.dt);
        p.seed = args.seed.unwrap_or(p.seed);
        if let Some(snaps) = args.snapshots {
            p.snapshots = snaps;
        }
    }
    let mode = mode.unwrap_or(scenario.mode);
    let outcome = execute(&scenario, mode)?;
    let dir = output_root().join(&scenario.name);
    write_outcome(&dir, &outcome)?;
    for line in &outcome.stdout {
        println!("{line}");
    }
    print!("{}", summary(&outcome.metrics));
    println!("outputs in {}", dir.display());
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("fpsteer: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
