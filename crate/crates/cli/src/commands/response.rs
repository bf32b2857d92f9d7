//! `xresponse response`: pairwise response and correlator series.

use std::collections::BTreeMap;

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use xresponse_core::response::{
    cross_response_both, sign_cross_correlator_both, LagSpec, ResponseSeries,
};
use xresponse_core::signs::SecondGrid;
use xresponse_core::types::Symbol;

use crate::artifacts::{day_set, load_grids, resolve_symbols, restrict_days, write_series};
use crate::config::{ConventionChoice, RunConfig};
use crate::failure::Failure;

#[derive(clap::Args)]
pub struct ResponseArgs {
    /// Ordered pairs `I:J`, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "all_pairs")]
    pairs: Vec<String>,
    /// All ordered pairs over the symbol set.
    #[arg(long)]
    all_pairs: bool,
    /// Also compute self series (i, i).
    #[arg(long = "self")]
    self_series: bool,
    /// Which series family to emit.
    #[arg(long, value_enum, default_value_t = KindChoice::Both)]
    kind: KindChoice,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum KindChoice {
    Response,
    Correlator,
    Both,
}

fn parse_pairs(args: &ResponseArgs, symbols: &[Symbol]) -> Result<Vec<(Symbol, Symbol)>, Failure> {
    let mut pairs = Vec::new();
    if args.all_pairs {
        for i in symbols {
            for j in symbols {
                if i != j {
                    pairs.push((i.clone(), j.clone()));
                }
            }
        }
    } else {
        for spec in &args.pairs {
            let (i, j) = spec
                .split_once(':')
                .ok_or_else(|| Failure::parse(anyhow!("pair {spec:?} is not of the form I:J")))?;
            pairs.push((
                Symbol::new(i).map_err(Failure::parse)?,
                Symbol::new(j).map_err(Failure::parse)?,
            ));
        }
    }
    if args.self_series {
        for s in symbols {
            pairs.push((s.clone(), s.clone()));
        }
    }
    if pairs.is_empty() {
        return Err(Failure::parse(anyhow!(
            "nothing to compute: pass --pairs, --all-pairs, or --self"
        )));
    }
    Ok(pairs)
}

fn keep(series: ResponseSeries<f64>, choice: ConventionChoice) -> Vec<ResponseSeries<f64>> {
    let wanted = choice.conventions();
    if wanted.contains(&series.convention) {
        vec![series]
    } else {
        vec![]
    }
}

pub fn compute_pair(
    grids: &BTreeMap<Symbol, Vec<SecondGrid<f64>>>,
    i: &Symbol,
    j: &Symbol,
    lags: &LagSpec,
    kind: KindChoice,
    choice: ConventionChoice,
) -> Result<Vec<ResponseSeries<f64>>, Failure> {
    let gi = grids
        .get(i)
        .ok_or_else(|| Failure::missing_input(anyhow!("no cached grids for {i}")))?;
    let gj = grids
        .get(j)
        .ok_or_else(|| Failure::missing_input(anyhow!("no cached grids for {j}")))?;
    let common: std::collections::BTreeSet<_> =
        day_set(gi).intersection(&day_set(gj)).copied().collect();
    if common.is_empty() {
        return Err(Failure::missing_input(anyhow!(
            "no common trading days for ({i}, {j})"
        )));
    }
    let gi = restrict_days(gi, &common);
    let gj = restrict_days(gj, &common);

    let mut out = Vec::new();
    if matches!(kind, KindChoice::Response | KindChoice::Both) {
        let (inc, exc) = cross_response_both(&gi, &gj, lags)
            .with_context(|| format!("response ({i}, {j})"))
            .map_err(Failure::missing_input)?;
        out.extend(keep(inc, choice));
        out.extend(keep(exc, choice));
    }
    if matches!(kind, KindChoice::Correlator | KindChoice::Both) {
        let (inc, exc) = sign_cross_correlator_both(&gi, &gj, lags)
            .with_context(|| format!("correlator ({i}, {j})"))
            .map_err(Failure::missing_input)?;
        out.extend(keep(inc, choice));
        out.extend(keep(exc, choice));
    }
    Ok(out)
}

/// Loads grids for every symbol touched by the pair list.
pub fn load_grid_map(
    config: &RunConfig,
    symbols: &[Symbol],
) -> Result<BTreeMap<Symbol, Vec<SecondGrid<f64>>>, Failure> {
    let mut grids = BTreeMap::new();
    for symbol in symbols {
        let loaded = load_grids(&config.cache_dir, symbol).map_err(Failure::missing_input)?;
        if loaded.is_empty() {
            return Err(Failure::missing_input(anyhow!(
                "no cached grids for {symbol} under {}",
                config.cache_dir.display()
            )));
        }
        grids.insert(symbol.clone(), loaded);
    }
    Ok(grids)
}

pub fn run(config: &RunConfig, args: ResponseArgs) -> Result<(), Failure> {
    let session = config.session_window().map_err(Failure::parse)?;
    let lags = config.lag_spec(session.grid_len()).map_err(Failure::parse)?;
    let symbols = resolve_symbols(config, &config.cache_dir).map_err(Failure::missing_input)?;
    let pairs = parse_pairs(&args, &symbols)?;

    let mut touched: Vec<Symbol> = pairs
        .iter()
        .flat_map(|(i, j)| [i.clone(), j.clone()])
        .collect();
    touched.sort();
    touched.dedup();
    let grids = load_grid_map(config, &touched)?;

    let pool = super::pool(config.jobs)?;
    let all_series: Vec<ResponseSeries<f64>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|(i, j)| compute_pair(&grids, i, j, &lags, args.kind, config.convention))
            .collect::<Result<Vec<_>, Failure>>()
    })?
    .into_iter()
    .flatten()
    .collect();

    for series in &all_series {
        write_series(&config.output_dir, config, series)?;
    }
    println!(
        "wrote {} series for {} pair(s) into {}",
        all_series.len(),
        pairs.len(),
        config.output_dir.display()
    );
    Ok(())
}
