use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wavecompact::experiments::{run, ExperimentConfig, ExperimentKind, RunSummary};
use wavecompact::Error;

#[derive(Parser)]
#[command(name = "wavecompact", version, about = "Experiments for the compact fourth-order wave scheme")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for ladder rungs.
    #[arg(long, env = "WAVECOMPACT_JOBS")]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Single run with trajectory output.
    Solve(Common),
    /// Refinement study with fitted orders.
    Converge(Common),
    /// Measured against predicted error norms for the sharpness data.
    Sharpness(Common),
    /// Stepper against the closed-form harmonic solution.
    OracleCheck(Common),
    /// Stability inequalities on random data.
    StabilityProbe(Common),
}

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_MESH: u8 = 2;
const EXIT_CONFIG: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        _ if e.is_mesh_violation() => EXIT_MESH,
        Error::Config(_) | Error::Contract(_) | Error::Json(_) => EXIT_CONFIG,
        _ => EXIT_CHECK_FAILED,
    }
}

fn execute(kind: ExperimentKind, args: &Common) -> Result<RunSummary, Error> {
    let config = ExperimentConfig::from_path(&args.config)?;
    let out = args.out.clone().or_else(|| config.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    run(kind, &config, &out, args.jobs)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Solve(a) => (ExperimentKind::Solve, a),
        Command::Converge(a) => (ExperimentKind::Converge, a),
        Command::Sharpness(a) => (ExperimentKind::Sharpness, a),
        Command::OracleCheck(a) => (ExperimentKind::OracleCheck, a),
        Command::StabilityProbe(a) => (ExperimentKind::StabilityProbe, a),
    };
    match execute(kind, args) {
        Ok(summary) => {
            println!(
                "{}: {} in {:.2} s",
                kind.name(),
                if summary.passed { "ok" } else { "FAILED" },
                summary.wall_time_seconds
            );
            if summary.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK_FAILED)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
