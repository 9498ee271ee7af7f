use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use meanfield::{run, write_report, RunConfig, RunError, Subcommand};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Condensate trajectory.
    Hartree,
    /// Bogoliubov map, symplectic and two-point checks.
    Bogomap,
    /// Correction hierarchy along each configured route.
    Hierarchy,
    /// Parity and generalized Wick checks, pairing counts, Taylor bound.
    WickCheck,
    /// Norm-error curves against exact N-body runs.
    OracleSlope,
    /// Density-matrix and depletion expansions.
    Rdm,
    /// Observables over the configured particle numbers.
    Sweep,
}

impl Command {
    fn sub(self) -> Subcommand {
        match self {
            Command::Hartree => Subcommand::Hartree,
            Command::Bogomap => Subcommand::Bogomap,
            Command::Hierarchy => Subcommand::Hierarchy,
            Command::WickCheck => Subcommand::WickCheck,
            Command::OracleSlope => Subcommand::OracleSlope,
            Command::Rdm => Subcommand::Rdm,
            Command::Sweep => Subcommand::Sweep,
        }
    }
}

/// Mean-field and Bogoliubov dynamics of lattice bosons with higher-order
/// corrections.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML configuration; built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `run.output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; overrides `run.workers`.
    #[arg(long)]
    workers: Option<usize>,
    /// Random seed; overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(cli: &Cli) -> Result<bool, RunError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.run.output = o.clone();
    }
    if let Some(w) = cli.workers {
        cfg.run.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    cfg.validate()?;
    let report = run(cli.command.sub(), &cfg)?;
    let artifacts = write_report(&report, &cfg, &cfg.run.output)?;
    for c in &report.checks {
        println!("{}", c.line());
    }
    println!("wrote {} files to {}", artifacts.files.len(), artifacts.dir.display());
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
