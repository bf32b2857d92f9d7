//! On-disk layout of caches and result files, and the series store loader.
//!
//! Result series are written twice per (kind, pair, convention): a CSV for
//! plotting (`tau,value,stderr,n`) and a JSON document carrying the series
//! plus the resolved run configuration. The JSON documents are what later
//! commands read back.

use std::collections::BTreeSet;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use xresponse_core::aggregate::{AverageSeries, SeriesStore};
use xresponse_core::response::{ResponseSeries, SeriesKind};
use xresponse_core::signs::{read_grid, write_grid, SecondGrid};
use xresponse_core::types::{Day, Symbol};
use xresponse_core::ZeroConvention;

use crate::config::RunConfig;

/// Writes a JSON document `{config, body}`; the config field is what lets
/// any artifact reproduce its run.
pub fn write_json<T: Serialize>(path: &Path, config: &RunConfig, body: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let doc = serde_json::json!({
        "config": config,
        "body": body,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json_body<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let doc: serde_json::Value = serde_json::from_reader(BufReader::new(file))
        .with_context(|| format!("parsing {}", path.display()))?;
    let body = doc
        .get("body")
        .cloned()
        .with_context(|| format!("{}: missing body", path.display()))?;
    serde_json::from_value(body).with_context(|| format!("decoding {}", path.display()))
}

pub fn write_text(path: &Path, text: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

// ---------------------------------------------------------------------
// data and cache layout
// ---------------------------------------------------------------------

pub fn grid_path(cache_dir: &Path, symbol: &Symbol, day: Day) -> PathBuf {
    cache_dir.join(symbol.as_str()).join(format!("{day}.grid"))
}

/// Symbols present in a directory laid out as `<dir>/<SYMBOL>/...`.
pub fn discover_symbols(dir: &Path) -> Result<Vec<Symbol>> {
    let mut symbols = Vec::new();
    let entries =
        fs::read_dir(dir).with_context(|| format!("missing directory {}", dir.display()))?;
    for entry in entries {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            if let Ok(sym) = Symbol::new(entry.file_name().to_string_lossy().into_owned()) {
                symbols.push(sym);
            }
        }
    }
    symbols.sort();
    Ok(symbols)
}

/// Days for which `<dir>/<SYMBOL>/<day>.<suffix>` exists.
pub fn discover_days(dir: &Path, symbol: &Symbol, suffix: &str) -> Result<Vec<Day>> {
    let sym_dir = dir.join(symbol.as_str());
    let mut days = Vec::new();
    let entries = fs::read_dir(&sym_dir)
        .with_context(|| format!("missing directory {}", sym_dir.display()))?;
    for entry in entries {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix(suffix) {
            if let Ok(day) = stem.parse::<Day>() {
                days.push(day);
            }
        }
    }
    days.sort();
    Ok(days)
}

pub fn write_grid_cache(cache_dir: &Path, grid: &SecondGrid<f64>) -> Result<PathBuf> {
    let path = grid_path(cache_dir, &grid.symbol, grid.day);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut buf = Vec::new();
    write_grid(grid, &mut buf)?;
    fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Loads all cached grids of one symbol, ascending by day.
pub fn load_grids(cache_dir: &Path, symbol: &Symbol) -> Result<Vec<SecondGrid<f64>>> {
    let days = discover_days(cache_dir, symbol, ".grid")?;
    let mut grids = Vec::with_capacity(days.len());
    for day in days {
        let path = grid_path(cache_dir, symbol, day);
        let file =
            fs::File::open(&path).with_context(|| format!("missing cache {}", path.display()))?;
        let grid =
            read_grid(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?;
        grids.push(grid);
    }
    Ok(grids)
}

// ---------------------------------------------------------------------
// result series naming
// ---------------------------------------------------------------------

fn kind_token(kind: SeriesKind) -> &'static str {
    match kind {
        SeriesKind::CrossResponse => "response",
        SeriesKind::SelfResponse => "self",
        SeriesKind::SignCorrelator => "correlator",
    }
}

pub fn series_stem(kind: SeriesKind, i: &Symbol, j: &Symbol, conv: ZeroConvention) -> String {
    format!("{}_{i}_{j}_{}", kind_token(kind), conv.token())
}

pub fn average_stem(
    kind: SeriesKind,
    direction: xresponse_core::aggregate::Direction,
    anchor: &Symbol,
    conv: ZeroConvention,
) -> String {
    format!(
        "average_{}_{direction}_{anchor}_{}",
        kind_token(kind),
        conv.token()
    )
}

/// Writes the CSV + JSON pair for one pairwise series.
pub fn write_series(out_dir: &Path, config: &RunConfig, series: &ResponseSeries<f64>) -> Result<()> {
    let stem = series_stem(series.kind, &series.i, &series.j, series.convention);
    let mut csv = Vec::new();
    series.write_csv(&mut csv, Some(&config.provenance()))?;
    write_text(&out_dir.join(format!("{stem}.csv")), &csv)?;
    write_json(&out_dir.join(format!("{stem}.json")), config, series)
}

/// Writes the CSV + JSON pair for one averaged series.
pub fn write_average(
    out_dir: &Path,
    config: &RunConfig,
    avg: &AverageSeries<f64>,
    stem: &str,
) -> Result<()> {
    let mut csv = Vec::new();
    avg.write_csv(&mut csv, Some(&config.provenance()))?;
    write_text(&out_dir.join(format!("{stem}.csv")), &csv)?;
    write_json(&out_dir.join(format!("{stem}.json")), config, avg)
}

/// Loads every pairwise series JSON in the output directory.
pub fn load_store(out_dir: &Path) -> Result<SeriesStore<f64>> {
    let mut store = SeriesStore::new();
    let Ok(entries) = fs::read_dir(out_dir) else {
        return Ok(store);
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.extension().is_some_and(|ext| ext == "json")
                && p.file_name().is_some_and(|n| {
                    let n = n.to_string_lossy();
                    n.starts_with("response_")
                        || n.starts_with("self_")
                        || n.starts_with("correlator_")
                })
        })
        .collect();
    paths.sort();
    for path in paths {
        let series: ResponseSeries<f64> = read_json_body(&path)?;
        store.insert(series);
    }
    Ok(store)
}

/// Loads averaged series JSONs (`average_*.json`) from the output directory.
pub fn load_averages(out_dir: &Path) -> Result<Vec<AverageSeries<f64>>> {
    let mut out = Vec::new();
    let Ok(entries) = fs::read_dir(out_dir) else {
        return Ok(out);
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.extension().is_some_and(|ext| ext == "json")
                && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("average_"))
        })
        .collect();
    paths.sort();
    for path in paths {
        out.push(read_json_body(&path)?);
    }
    Ok(out)
}

/// Resolves the working symbol set: explicit config list, else discovery.
pub fn resolve_symbols(config: &RunConfig, dir: &Path) -> Result<Vec<Symbol>> {
    let listed = config.symbol_list()?;
    if listed.is_empty() {
        discover_symbols(dir)
    } else {
        Ok(listed)
    }
}

/// Common days across a set of grid slices (pairwise runs intersect days
/// per pair; this is the helper for that).
pub fn day_set(grids: &[SecondGrid<f64>]) -> BTreeSet<Day> {
    grids.iter().map(|g| g.day).collect()
}

/// Restricts grids to the given day set, ascending by day.
pub fn restrict_days(grids: &[SecondGrid<f64>], days: &BTreeSet<Day>) -> Vec<SecondGrid<f64>> {
    let mut out: Vec<SecondGrid<f64>> = grids
        .iter()
        .filter(|g| days.contains(&g.day))
        .cloned()
        .collect();
    out.sort_by_key(|g| g.day);
    out
}
