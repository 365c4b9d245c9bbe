//! gwi: simulate subcritical multitype branching processes with
//! immigration, sample their stationary law, measure moment decay, and
//! emit explicit upper-bound certificates and tail diagnostics.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use gwi_cli::config::{ExperimentConfig, OutputFormat};
use gwi_cli::{commands, parallel, CliError};

#[derive(Parser)]
#[command(name = "gwi", version, about = "Galton-Watson-with-immigration toolkit")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config sample count.
    #[arg(long, global = true)]
    samples: Option<u64>,
    /// Output path (default stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format (default from config).
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Worker threads; must not change any result.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Trajectory statistics over independent runs.
    Simulate,
    /// Stationary sample statistics and empirical alpha-moments.
    Stationary,
    /// M_alpha(k) decay estimates and fitted geometric rates.
    Decay,
    /// Proof-constant certificates with bound-vs-estimate tables.
    Certify,
    /// Hill tail-index estimates over stationary norms.
    Tail,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.msg);
            std::process::exit(e.code);
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::config("--config PATH is required"))?;
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::parse(&text).map_err(CliError::config)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(s) = cli.samples {
        cfg.samples = s;
    }
    cfg.validate().map_err(CliError::config)?;
    let format = cli.format.unwrap_or(cfg.format);

    let command = cli.command;
    let cfg_ref = &cfg;
    let output = parallel::install_threads(cli.threads, move || match command {
        Cmd::Simulate => commands::simulate(cfg_ref),
        Cmd::Stationary => commands::stationary(cfg_ref),
        Cmd::Decay => commands::decay(cfg_ref),
        Cmd::Certify => commands::certify(cfg_ref),
        Cmd::Tail => commands::tail(cfg_ref),
    })?;

    if let Some(report) = &output.report {
        eprint!("{report}");
    }
    match &cli.out {
        Some(p) => {
            let mut f = fs::File::create(p)
                .map_err(|e| CliError::config(format!("cannot create {}: {e}", p.display())))?;
            output
                .table
                .write(format, &mut f)
                .map_err(|e| CliError::runtime(format!("write failed: {e}")))?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            output
                .table
                .write(format, &mut lock)
                .and_then(|_| lock.flush())
                .map_err(|e| CliError::runtime(format!("write failed: {e}")))?;
        }
    }
    Ok(())
}
