use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use collapse_lab::harness::{self, ExperimentConfig, ExperimentKind, HarnessError, RunOptions};

#[derive(Debug, Parser)]
#[command(
    name = "collapse-lab",
    version,
    about = "Run collapse-lab experiments from a TOML config"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Survival on the absorbing ring, with the classical comparator
    Ring(Common),
    /// Landscape-driven selection sequence
    Select(Common),
    /// Monte Carlo acceptance sweep over transition angles
    Born(Common),
    /// Photon-mode projection of classical trajectories
    Current(Common),
    /// Free-spreading estimate in SI units
    Spread(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML config; defaults are used for anything missing
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "DIR", env = harness::OUT_ENV)]
    out: Option<PathBuf>,
    /// Seed for all random streams (overrides the config)
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this
    #[arg(long, value_name = "N", default_value_t = 1)]
    workers: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let detail = e.to_string();
            let detail = detail
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ");
            eprintln!("{}", HarnessError::Config(detail.to_string()).report_line());
            return ExitCode::from(2);
        }
        Err(e) => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let (kind, common) = match cli.command {
        Command::Ring(c) => (ExperimentKind::Ring, c),
        Command::Select(c) => (ExperimentKind::Select, c),
        Command::Born(c) => (ExperimentKind::Born, c),
        Command::Current(c) => (ExperimentKind::Current, c),
        Command::Spread(c) => (ExperimentKind::Spread, c),
    };
    match execute(kind, common) {
        Ok(dir) => {
            println!("ok: {} -> {}", kind.name(), dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.report_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(kind: ExperimentKind, common: Common) -> Result<PathBuf, HarnessError> {
    let config = match &common.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    let opts = RunOptions {
        experiment: kind,
        out_dir: common.out,
        seed: common.seed,
        workers: common.workers,
    };
    harness::run(&config, &opts).map(|report| report.out_dir)
}
