//! `xresponse average` and `xresponse sector`: passive/active averages
//! over the whole partner set or restricted to sectors.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;

use anyhow::anyhow;
use xresponse_core::aggregate::{average, sector_average, AggregateError, Direction};
use xresponse_core::ingest::SectorMap;
use xresponse_core::response::SeriesKind;
use xresponse_core::types::Symbol;

use crate::artifacts::{average_stem, load_store, write_average};
use crate::config::RunConfig;
use crate::failure::Failure;

#[derive(clap::Args)]
pub struct AverageArgs {
    /// Anchor stock.
    #[arg(long)]
    pub anchor: String,
    /// passive (anchor is impacted) or active (anchor impacts).
    #[arg(long)]
    pub direction: Direction,
    /// Series family to average.
    #[arg(long, value_enum, default_value_t = AvgKind::Response)]
    pub kind: AvgKind,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AvgKind {
    Response,
    Correlator,
}

impl AvgKind {
    pub fn series_kind(self) -> SeriesKind {
        match self {
            AvgKind::Response => SeriesKind::CrossResponse,
            AvgKind::Correlator => SeriesKind::SignCorrelator,
        }
    }
}

fn map_aggregate_error(e: AggregateError) -> Failure {
    match e {
        AggregateError::MissingPairSeries(_) | AggregateError::MissingSeries { .. } => {
            Failure::missing_input(e)
        }
        AggregateError::DegenerateMax
        | AggregateError::DegenerateVariance(_)
        | AggregateError::EmptySector(_) => Failure::degenerate(e),
        other => Failure::from(anyhow::Error::from(other)),
    }
}

pub fn run(config: &RunConfig, args: AverageArgs) -> Result<(), Failure> {
    let store = load_store(&config.output_dir).map_err(Failure::missing_input)?;
    if store.is_empty() {
        return Err(Failure::missing_input(anyhow!(
            "no series found under {}; run `xresponse response` first",
            config.output_dir.display()
        )));
    }
    let anchor = Symbol::new(args.anchor.as_str()).map_err(Failure::parse)?;
    let partners: BTreeSet<Symbol> = store.symbols();

    for convention in config.convention.conventions() {
        let avg = average(
            args.direction,
            &anchor,
            &partners,
            args.kind.series_kind(),
            convention,
            &store,
        )
        .map_err(map_aggregate_error)?;
        let stem = average_stem(args.kind.series_kind(), args.direction, &anchor, convention);
        write_average(&config.output_dir, config, &avg, &stem)?;
        println!(
            "{stem}: {} partner(s), {} lag point(s)",
            avg.universe.len(),
            avg.points.len()
        );
    }
    Ok(())
}

#[derive(clap::Args)]
pub struct SectorArgs {
    #[command(flatten)]
    pub base: AverageArgs,
    /// Restrict to one sector; default: every sector in the map.
    #[arg(long)]
    pub sector: Option<String>,
}

pub fn load_sector_map(config: &RunConfig) -> Result<SectorMap, Failure> {
    if let Some(path) = &config.sector_map {
        let file = File::open(path)
            .map_err(|e| Failure::missing_input(anyhow!("cannot open {}: {e}", path.display())))?;
        return SectorMap::parse(BufReader::new(file)).map_err(Failure::parse);
    }
    // Synthetic universes ship a sectors.csv next to the tick data.
    let candidate = config.data_dir.join("sectors.csv");
    if candidate.exists() {
        let file = File::open(&candidate).map_err(anyhow::Error::from)?;
        return SectorMap::parse(BufReader::new(file)).map_err(Failure::parse);
    }
    Ok(SectorMap::sp500_99())
}

pub fn run_sector(config: &RunConfig, args: SectorArgs) -> Result<(), Failure> {
    let store = load_store(&config.output_dir).map_err(Failure::missing_input)?;
    if store.is_empty() {
        return Err(Failure::missing_input(anyhow!(
            "no series found under {}; run `xresponse response` first",
            config.output_dir.display()
        )));
    }
    let anchor = Symbol::new(args.base.anchor.as_str()).map_err(Failure::parse)?;
    let map = load_sector_map(config)?;
    let kind = args.base.kind.series_kind();

    let sectors: Vec<String> = match &args.sector {
        Some(s) => vec![s.clone()],
        None => map.sectors().into_iter().map(str::to_owned).collect(),
    };

    let mut written = 0usize;
    for sector in &sectors {
        for convention in config.convention.conventions() {
            match sector_average(
                &anchor,
                args.base.direction,
                sector,
                &map,
                kind,
                convention,
                &store,
            ) {
                Ok(avg) => {
                    let stem = format!(
                        "sector_{}_{}_{anchor}_{sector}_{}",
                        match kind {
                            SeriesKind::SignCorrelator => "correlator",
                            _ => "response",
                        },
                        args.base.direction,
                        convention.token()
                    );
                    write_average(&config.output_dir, config, &avg, &stem)?;
                    written += 1;
                }
                Err(AggregateError::EmptySector(s)) => {
                    if args.sector.is_some() {
                        return Err(Failure::degenerate(AggregateError::EmptySector(s)));
                    }
                    eprintln!("skipping sector {s}: no members besides the anchor");
                }
                Err(other) => return Err(map_aggregate_error(other)),
            }
        }
    }
    println!("wrote {written} sector average series");
    Ok(())
}
