//! `xresponse` — batch analytics over trades-and-quotes tick data:
//! response functions, sign correlators, averages, matrices, rankings,
//! power-law fits, and a synthetic data generator for verification runs.

mod artifacts;
mod commands;
mod config;
mod failure;

use clap::{Parser, Subcommand};
use config::{ConventionChoice, RunConfig};
use failure::Failure;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "xresponse", version, about = "Cross-response batch analytics")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct GlobalOpts {
    /// TOML run-configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Input tick-data directory.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Grid cache directory.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Result directory.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Comma-separated symbol list; default: discover from inputs.
    #[arg(long, global = true, value_delimiter = ',')]
    symbols: Vec<String>,
    /// Symbol-to-sector CSV.
    #[arg(long, global = true)]
    sector_map: Option<PathBuf>,
    /// Lags: comma list `1,2,60,300` or range `a:b:log[:n]` / `a:b:lin[:n]`.
    #[arg(long, global = true)]
    lags: Option<String>,
    /// Zero-sign convention(s) to compute.
    #[arg(long, global = true, value_enum)]
    convention: Option<ConventionChoice>,
    /// Worker threads; results are byte-identical for any value.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse tick files and write second-grid caches.
    Ingest,
    /// Compute pairwise responses and sign correlators.
    Response(commands::response::ResponseArgs),
    /// Passive/active averages over partners.
    Average(commands::average::AverageArgs),
    /// Per-sector averages for one anchor.
    Sector(commands::average::SectorArgs),
    /// Normalized response matrix at a fixed lag.
    Matrix(commands::matrix::MatrixArgs),
    /// Rank stocks by average response strength.
    Rank(commands::rank::RankArgs),
    /// Power-law fit of a sign correlator.
    Fit(commands::fit::FitArgs),
    /// Correlation of active response with trading activity.
    Corr(commands::corr::CorrArgs),
    /// Generate synthetic tick data.
    Synth(commands::synth::SynthArgs),
    /// Check the zero-sign scaling identities on computed series.
    Validate,
}

fn resolve_config(opts: &GlobalOpts) -> Result<RunConfig, Failure> {
    let mut config = RunConfig::default();
    if let Some(path) = &opts.config {
        let file = RunConfig::load_file(path).map_err(Failure::parse)?;
        config.apply_file(file);
    }
    if let Some(v) = &opts.data_dir {
        config.data_dir = v.clone();
    }
    if let Some(v) = &opts.cache_dir {
        config.cache_dir = v.clone();
    }
    if let Some(v) = &opts.output_dir {
        config.output_dir = v.clone();
    }
    if !opts.symbols.is_empty() {
        config.symbols = opts.symbols.clone();
    }
    if let Some(v) = &opts.sector_map {
        config.sector_map = Some(v.clone());
    }
    if let Some(v) = &opts.lags {
        config.lags = v.clone();
    }
    if let Some(v) = opts.convention {
        config.convention = v;
    }
    if let Some(v) = opts.jobs {
        if v == 0 {
            return Err(Failure::parse(anyhow::anyhow!("--jobs must be >= 1")));
        }
        config.jobs = v;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = resolve_config(&cli.global)?;
    match cli.command {
        Command::Ingest => commands::ingest::run(&config),
        Command::Response(args) => commands::response::run(&config, args),
        Command::Average(args) => commands::average::run(&config, args),
        Command::Sector(args) => commands::average::run_sector(&config, args),
        Command::Matrix(args) => commands::matrix::run(&config, args),
        Command::Rank(args) => commands::rank::run(&config, args),
        Command::Fit(args) => commands::fit::run(&config, args),
        Command::Corr(args) => commands::corr::run(&config, args),
        Command::Synth(args) => commands::synth::run(&config, args),
        Command::Validate => commands::validate::run(&config),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            std::process::exit(failure.code);
        }
    }
}
