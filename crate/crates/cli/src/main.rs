use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ltvid_cli::{execute, Command, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "ltvid", version, about = "Delay-Doppler channel identification experiments")]
struct Cli {
    /// JSON experiment config. Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Exit with status 1 when a threshold is missed.
    #[arg(long, global = true)]
    check: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Simulate, estimate and score channel taps.
    Identify,
    /// Windowed density estimates and the identifiability verdict.
    Density,
    /// Identifiability-ratio sweep and STFT/Bargmann check.
    Verify,
    /// Identification accuracy across SNR levels.
    Sweep,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Identify => Command::Identify,
        Cmd::Density => Command::Density,
        Cmd::Verify => Command::Verify,
        Cmd::Sweep => Command::Sweep,
    };
    let config = match &cli.config {
        Some(path) => ExperimentConfig::load(path),
        None => Ok(ExperimentConfig::default()),
    };
    let result = config.and_then(|c| execute(command, &c, cli.seed, cli.out.as_deref()));
    match result {
        Ok(outcome) => {
            let status = if outcome.passed { "pass" } else { "FAIL" };
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{command}: {status}: {}", outcome.summary);
            for f in &outcome.files {
                let _ = writeln!(out, "  wrote {}", f.display());
            }
            if cli.check && !outcome.passed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
