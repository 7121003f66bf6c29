mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use overindep::Error;

use commands::{CmdResult, Failure, Outcome};
use config::ExperimentConfig;

/// Exact over/under-independence constructions and sweeps on Bernoulli shifts
/// and circle rotations.
///
/// Exit status: 0 when every certified check passes, 2 when one fails, 1 on
/// configuration or resource errors.
#[derive(Parser)]
#[command(name = "overindep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the configured set and write its trace.
    Construct(Common),
    /// Build the set, then sweep it and write the reports.
    Verify(Common),
    /// Correlation sweep of an explicit cylinder union.
    Sweep(Common),
    /// Crossing and rigidity demo for a rotation.
    DemoRotation(Common),
    /// Quick invariant suite.
    Selftest {
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `out` or `out/`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    stages: Option<usize>,
}

fn load(c: &Common) -> Result<(ExperimentConfig, PathBuf), Failure> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(h) = c.horizon {
        if let Some(s) = cfg.construction.as_mut() {
            s.horizon = Some(h);
        }
        if let Some(s) = cfg.sweep.as_mut() {
            s.horizon = h;
        }
        if let Some(s) = cfg.rotation.as_mut() {
            s.horizon = h as i64;
        }
    }
    if let (Some(k), Some(s)) = (c.stages, cfg.construction.as_mut()) {
        s.stages = k;
    }
    let out = c.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out))
}

fn threads(n: Option<usize>) {
    if let Some(n) = n {
        // a second call only fails if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn run(cli: Cli) -> CmdResult {
    let (common, f): (Common, fn(&ExperimentConfig, &std::path::Path) -> CmdResult) = match cli.command {
        Command::Selftest { threads: t } => {
            threads(t);
            return commands::selftest();
        }
        Command::Construct(c) => (c, commands::construct),
        Command::Verify(c) => (c, commands::verify),
        Command::Sweep(c) => (c, commands::sweep),
        Command::DemoRotation(c) => (c, commands::demo_rotation),
    };
    threads(common.threads);
    let (cfg, out) = load(&common)?;
    f(&cfg, &out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Core(Error::Unreachable(msg))) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
    }
}
