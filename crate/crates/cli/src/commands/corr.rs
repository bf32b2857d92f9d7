//! `xresponse corr`: Pearson correlation between active average response
//! at a fixed lag and the average daily number of trades.

use std::collections::{BTreeMap, BTreeSet};

use anyhow::anyhow;
use serde::Serialize;
use xresponse_core::aggregate::{average, trade_count_correlation, AggregateError, Direction};
use xresponse_core::response::SeriesKind;
use xresponse_core::signs::{activity_stats, ActivityStats};
use xresponse_core::types::Symbol;
use xresponse_core::ZeroConvention;

use crate::artifacts::{load_grids, load_store, write_json, write_text};
use crate::config::RunConfig;
use crate::failure::Failure;

#[derive(clap::Args)]
pub struct CorrArgs {
    /// Lag (seconds) of the average response entering the correlation.
    #[arg(long, default_value_t = 60)]
    pub tau: u32,
    /// Which average enters; active reproduces the trading-frequency link.
    #[arg(long, default_value = "active")]
    pub direction: Direction,
}

#[derive(Serialize)]
struct CorrDoc {
    tau: u32,
    direction: Direction,
    convention: ZeroConvention,
    corr: f64,
    n_symbols: usize,
    points: Vec<CorrPoint>,
}

#[derive(Serialize)]
struct CorrPoint {
    symbol: Symbol,
    response: f64,
    avg_daily_trades: f64,
}

pub fn run(config: &RunConfig, args: CorrArgs) -> Result<(), Failure> {
    let store = load_store(&config.output_dir).map_err(Failure::missing_input)?;
    if store.is_empty() {
        return Err(Failure::missing_input(anyhow!(
            "no series found under {}; run `xresponse response` first",
            config.output_dir.display()
        )));
    }
    let symbols: BTreeSet<Symbol> = store.symbols();

    let mut stats: BTreeMap<Symbol, ActivityStats<f64>> = BTreeMap::new();
    for symbol in &symbols {
        let grids = load_grids(&config.cache_dir, symbol).map_err(Failure::missing_input)?;
        if grids.is_empty() {
            return Err(Failure::missing_input(anyhow!(
                "no cached grids for {symbol}"
            )));
        }
        let st = activity_stats(&grids).map_err(|e| Failure::from(anyhow::Error::from(e)))?;
        stats.insert(symbol.clone(), st);
    }

    for convention in config.convention.conventions() {
        let mut values: BTreeMap<Symbol, f64> = BTreeMap::new();
        for anchor in &symbols {
            let avg = average(
                args.direction,
                anchor,
                &symbols,
                SeriesKind::CrossResponse,
                convention,
                &store,
            )
            .map_err(Failure::missing_input)?;
            let point = avg.get(args.tau).ok_or_else(|| {
                Failure::missing_input(anyhow!("no value at tau={} for {anchor}", args.tau))
            })?;
            values.insert(anchor.clone(), point.value);
        }
        let corr = trade_count_correlation(&values, &stats).map_err(|e| match e {
            AggregateError::DegenerateVariance(_) => Failure::degenerate(e),
            AggregateError::TooFewSymbols { .. } => Failure::missing_input(e),
            other => Failure::from(anyhow::Error::from(other)),
        })?;

        let points: Vec<CorrPoint> = values
            .iter()
            .map(|(s, &v)| CorrPoint {
                symbol: s.clone(),
                response: v,
                avg_daily_trades: stats[s].avg_daily_trades,
            })
            .collect();
        let stem = format!("corr_{}_tau{}_{}", args.direction, args.tau, convention.token());
        let doc = CorrDoc {
            tau: args.tau,
            direction: args.direction,
            convention,
            corr,
            n_symbols: points.len(),
            points,
        };
        write_json(&config.output_dir.join(format!("{stem}.json")), config, &doc)?;

        let mut csv = String::new();
        csv.push_str(&format!("# {}\n", config.provenance()));
        csv.push_str("symbol,response,avg_daily_trades\n");
        for p in &doc.points {
            csv.push_str(&format!("{},{},{}\n", p.symbol, p.response, p.avg_daily_trades));
        }
        write_text(&config.output_dir.join(format!("{stem}.csv")), csv.as_bytes())?;
        println!("{stem}: corr={corr} over {} symbols", doc.n_symbols);
    }
    Ok(())
}
