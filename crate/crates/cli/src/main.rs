use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use volctl_cli::{run, validate_config, Mode, RunError};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Solve,
    Value,
    Policy,
    Simulate,
    SweepEps,
    SweepDegenerate,
    #[value(name = "solve-2d")]
    Solve2d,
    ConjugateTable,
}

impl From<Command> for Mode {
    fn from(c: Command) -> Mode {
        match c {
            Command::Solve => Mode::Solve,
            Command::Value => Mode::Value,
            Command::Policy => Mode::Policy,
            Command::Simulate => Mode::Simulate,
            Command::SweepEps => Mode::SweepEps,
            Command::SweepDegenerate => Mode::SweepDegenerate,
            Command::Solve2d => Mode::Solve2d,
            Command::ConjugateTable => Mode::ConjugateTable,
        }
    }
}

/// Solve the HJB equation with multiplicative noise through its
/// Fokker-Planck transform, synthesize the feedback control and check it by
/// simulation.
#[derive(Debug, Parser)]
#[command(name = "volctl", version)]
struct Cli {
    /// What to run.
    #[arg(value_enum)]
    mode: Command,
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// No progress output.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(source) => return fail(RunError::Io { path: cli.config, source }),
    };
    let mut cfg = match validate_config(&text, cli.mode.into()) {
        Ok(c) => c,
        Err(errs) => return fail(RunError::Config(errs)),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match run(&cfg, &cli.out, cli.quiet) {
        Ok(summary) => {
            if !cli.quiet {
                eprintln!("wrote {} files to {}", summary.files.len(), cli.out.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn fail(e: RunError) -> ExitCode {
    eprint!("{e}");
    ExitCode::from(e.exit_code() as u8)
}
