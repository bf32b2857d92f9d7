//! `xresponse rank`: top-k stocks by normalized average response.

use anyhow::anyhow;
use xresponse_core::aggregate::{rank_stocks, AggregateError, Direction};

use crate::artifacts::{load_store, write_json, write_text};
use crate::commands::average::load_sector_map;
use crate::config::RunConfig;
use crate::failure::Failure;

#[derive(clap::Args)]
pub struct RankArgs {
    #[arg(long)]
    pub direction: Direction,
    /// Lag (seconds) at which the averages are ranked.
    #[arg(long, default_value_t = 60)]
    pub tau: u32,
    /// Number of entries to keep.
    #[arg(short, long, default_value_t = 15)]
    pub k: usize,
    /// Rank by |value| instead of signed value.
    #[arg(long)]
    pub abs: bool,
}

pub fn run(config: &RunConfig, args: RankArgs) -> Result<(), Failure> {
    let store = load_store(&config.output_dir).map_err(Failure::missing_input)?;
    if store.is_empty() {
        return Err(Failure::missing_input(anyhow!(
            "no series found under {}; run `xresponse response` first",
            config.output_dir.display()
        )));
    }
    let map = load_sector_map(config)?;
    let symbols = store.symbols();

    for convention in config.convention.conventions() {
        let ranking = rank_stocks(
            args.direction,
            args.tau,
            convention,
            args.k,
            &symbols,
            &store,
            args.abs,
        )
        .map_err(|e| match e {
            AggregateError::MissingPairSeries(_) | AggregateError::MissingSeries { .. } => {
                Failure::missing_input(e)
            }
            other => Failure::from(anyhow::Error::from(other)),
        })?;
        let stem = format!("rank_{}_tau{}_{}", args.direction, args.tau, convention.token());
        let mut csv = Vec::new();
        ranking
            .write_csv(&mut csv, Some(&map), Some(&config.provenance()))
            .map_err(anyhow::Error::from)?;
        write_text(&config.output_dir.join(format!("{stem}.csv")), &csv)?;
        write_json(&config.output_dir.join(format!("{stem}.json")), config, &ranking)?;
        println!("{stem}: {} entries", ranking.entries.len());
    }
    Ok(())
}
