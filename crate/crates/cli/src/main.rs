use std::path::PathBuf;
use std::process::ExitCode;

use carrygap_core::config::RunConfig;
use carrygap_core::pipeline::{self, Command};
use carrygap_core::synth::gen_world;
use carrygap_core::{Error, ErrorKind, Result};
use clap::{Parser, Subcommand};

/// Option-implied carry gaps: identification, regressions and validation.
#[derive(Debug, Parser)]
#[command(name = "carrygap", version)]
struct Cli {
    /// TOML run configuration; relative input paths resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Specifications to estimate, by name.
    #[arg(long, global = true, num_args = 1..)]
    spec: Vec<String>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// Write a synthetic input world with a planted model.
    Synth,
    /// Identify discount factors and carry gaps.
    Identify,
    /// In-sample fits with HAC standard errors.
    Fit,
    /// Leave-one-year-out validation.
    Loyo,
    /// Incremental R² by lookback window.
    Scan,
    /// Nested lookback-window selection.
    Nested,
    /// Principal components of the asset slopes.
    Pca,
    /// Every report in one run.
    Report,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => return Err(Error::Config("--config is required for this command".into())),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.synth.seed = seed;
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?;
    }
    let cmd = match cli.command {
        Cmd::Synth => {
            let mut synth = match &cli.config {
                Some(_) => load_config(cli)?.synth,
                None => RunConfig::default().synth,
            };
            if let Some(seed) = cli.seed {
                synth.seed = seed;
            }
            let world = gen_world(&synth, &cli.out)?;
            println!(
                "synth: {} rows, {} quotes written to {}",
                world.manifest.rows,
                world.quotes.len(),
                cli.out.display()
            );
            return Ok(());
        }
        Cmd::Identify => Command::Identify,
        Cmd::Fit => Command::Fit,
        Cmd::Loyo => Command::Loyo,
        Cmd::Scan => Command::Scan,
        Cmd::Nested => Command::Nested,
        Cmd::Pca => Command::Pca,
        Cmd::Report => Command::Report,
    };
    let cfg = load_config(cli)?;
    let report = pipeline::run(cmd, &cfg, &cli.spec)?;
    if report.data_rows("carry_gap.csv") == Some(0) {
        log::warn!("no carry gaps identified; the report is empty");
    }
    report.write_to(&cli.out)?;
    println!(
        "{}: {} identifications, {} carry gaps, {} files written to {}",
        cmd.name(),
        report.data_rows("identification.csv").unwrap_or(0),
        report.data_rows("carry_gap.csv").unwrap_or(0),
        report.files().len(),
        cli.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numerical => 4,
            })
        }
    }
}
