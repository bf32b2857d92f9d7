//! `xresponse ingest`: parse tick files, build second grids, write caches,
//! and print the per-symbol record-count conservation report.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde::Serialize;
use xresponse_core::ingest::{parse_ticks, ParseReport, SessionWindow};
use xresponse_core::signs::SecondGrid;
use xresponse_core::types::{Day, Symbol};

use crate::artifacts::{discover_days, resolve_symbols, write_grid_cache, write_json};
use crate::config::RunConfig;
use crate::failure::Failure;

#[derive(Debug, Default, Clone, Serialize)]
struct SymbolReport {
    days_ingested: usize,
    days_skipped_no_trades: usize,
    trades: StreamTotals,
    quotes: StreamTotals,
}

#[derive(Debug, Default, Clone, Serialize)]
struct StreamTotals {
    lines_in: u64,
    retained: u64,
    dropped_window: u64,
    malformed: u64,
    flagged_crossed: u64,
    conserved: bool,
}

impl StreamTotals {
    fn absorb(&mut self, r: &xresponse_core::ingest::StreamReport) {
        self.lines_in += r.lines_in;
        self.retained += r.retained;
        self.dropped_window += r.dropped_window;
        self.malformed += r.malformed;
        self.flagged_crossed += r.flagged_crossed;
        self.conserved = self.lines_in == self.retained + self.dropped_window + self.malformed;
    }
}

fn ingest_one(
    data_dir: &Path,
    session: &SessionWindow,
    symbol: &Symbol,
    day: Day,
) -> Result<(Option<SecondGrid<f64>>, ParseReport), Failure> {
    let trades_path = data_dir.join(symbol.as_str()).join(format!("{day}.trades.csv"));
    let quotes_path = data_dir.join(symbol.as_str()).join(format!("{day}.quotes.csv"));
    let trades = BufReader::new(
        File::open(&trades_path)
            .with_context(|| format!("cannot open {}", trades_path.display()))
            .map_err(Failure::parse)?,
    );
    let quotes = BufReader::new(
        File::open(&quotes_path)
            .with_context(|| format!("cannot open {}", quotes_path.display()))
            .map_err(Failure::parse)?,
    );
    let (table, report) = parse_ticks::<f64, _, _>(trades, quotes, symbol.clone(), day, session)
        .with_context(|| format!("parsing {}", trades_path.display()))
        .map_err(Failure::parse)?;
    // Days without a single trade carry no intraday response; they are
    // dropped from the symbol's calendar here, before any intersection.
    if table.trades.is_empty() {
        return Ok((None, report));
    }
    let grid = SecondGrid::from_table(&table, session)
        .with_context(|| format!("building grid for {symbol} {day}"))
        .map_err(Failure::parse)?;
    Ok((Some(grid), report))
}

pub fn run(config: &RunConfig) -> Result<(), Failure> {
    let session = config.session_window().map_err(Failure::parse)?;
    let symbols = resolve_symbols(config, &config.data_dir).map_err(Failure::parse)?;
    if symbols.is_empty() {
        return Err(Failure::parse(anyhow!(
            "no symbols found under {}",
            config.data_dir.display()
        )));
    }

    let mut work: Vec<(Symbol, Day)> = Vec::new();
    for symbol in &symbols {
        let days = discover_days(&config.data_dir, symbol, ".trades.csv")
            .map_err(Failure::parse)?;
        if days.is_empty() {
            return Err(Failure::parse(anyhow!(
                "no tick files for {symbol} under {}",
                config.data_dir.display()
            )));
        }
        for day in days {
            work.push((symbol.clone(), day));
        }
    }

    let pool = super::pool(config.jobs)?;
    let results: Vec<(Symbol, Day, Option<SecondGrid<f64>>, ParseReport)> = pool.install(|| {
        work.par_iter()
            .map(|(symbol, day)| {
                ingest_one(&config.data_dir, &session, symbol, *day)
                    .map(|(grid, report)| (symbol.clone(), *day, grid, report))
            })
            .collect::<Result<Vec<_>, Failure>>()
    })?;

    let mut reports: std::collections::BTreeMap<Symbol, SymbolReport> = Default::default();
    for (symbol, _day, grid, parse_report) in &results {
        let entry = reports.entry(symbol.clone()).or_default();
        entry.trades.absorb(&parse_report.trades);
        entry.quotes.absorb(&parse_report.quotes);
        match grid {
            Some(_) => entry.days_ingested += 1,
            None => entry.days_skipped_no_trades += 1,
        }
    }
    for (_, _, grid, _) in &results {
        if let Some(grid) = grid {
            write_grid_cache(&config.cache_dir, grid).map_err(Failure::from)?;
        }
    }

    println!("symbol  days  skipped  lines_in  retained  dropped  malformed  crossed  conserved");
    for (symbol, report) in &reports {
        let lines = report.trades.lines_in + report.quotes.lines_in;
        let retained = report.trades.retained + report.quotes.retained;
        let dropped = report.trades.dropped_window + report.quotes.dropped_window;
        let malformed = report.trades.malformed + report.quotes.malformed;
        let conserved = report.trades.conserved && report.quotes.conserved;
        println!(
            "{symbol}  {}  {}  {lines}  {retained}  {dropped}  {malformed}  {}  {}",
            report.days_ingested,
            report.days_skipped_no_trades,
            report.quotes.flagged_crossed,
            if conserved { "ok" } else { "VIOLATED" },
        );
    }

    write_json(
        &config.cache_dir.join("ingest_report.json"),
        config,
        &reports,
    )?;
    Ok(())
}
