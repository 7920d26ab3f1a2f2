use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pfl::error::EXIT_USAGE;
use pfl::{Command, Invocation};

/// Harmonic measure, Poisson kernel and boundary flatness on star-shaped
/// domains.
#[derive(Parser, Debug)]
#[command(name = "pfl", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Build a domain and write `domain.json` and `cloud.csv`.
    Generate(Common),
    /// Run walk-on-spheres from the pole and estimate the Poisson kernel.
    Solve(Common),
    /// Flatness, density, BMO and stability measurements of a stored cloud.
    Analyze(Common),
    /// Run a verification scenario and write the report.
    Verify(Common),
    /// Re-emit report files from a stored `report.json` (given as `--config`).
    Report(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// JSON configuration file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Master seed; replaces the `seed` field of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Dotted `key=value` patch applied to the configuration (repeatable).
    #[arg(long = "override", value_name = "K=V")]
    overrides: Vec<String>,
    /// Worker threads, 0 for automatic. Falls back to `PFL_THREADS`.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let (cmd, common) = match cli.command {
        Sub::Generate(c) => (Command::Generate, c),
        Sub::Solve(c) => (Command::Solve, c),
        Sub::Analyze(c) => (Command::Analyze, c),
        Sub::Verify(c) => (Command::Verify, c),
        Sub::Report(c) => (Command::Report, c),
    };
    let inv = Invocation {
        config: common.config,
        seed: common.seed,
        out: common.out,
        overrides: common.overrides,
        threads: common.threads,
    };
    match pfl::run(cmd, &inv) {
        Ok(outcome) => {
            println!("{}", outcome.message.trim_end());
            ExitCode::from(outcome.exit_code)
        }
        Err(e) => {
            eprintln!("pfl {}: {e}", cmd.as_str());
            ExitCode::from(e.exit_code())
        }
    }
}
