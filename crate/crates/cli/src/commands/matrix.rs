//! `xresponse matrix`: normalized response matrix at a fixed lag, CSV plus
//! a JSON sidecar with the normalization scalar and sector boundaries for
//! heatmap tooling.

use anyhow::anyhow;
use serde::Serialize;
use xresponse_core::aggregate::{order_by_sector, response_matrix, AggregateError, SectorSpan};
use xresponse_core::types::Symbol;
use xresponse_core::ZeroConvention;

use crate::artifacts::{load_store, write_json, write_text};
use crate::commands::average::load_sector_map;
use crate::config::RunConfig;
use crate::failure::Failure;

#[derive(clap::Args)]
pub struct MatrixArgs {
    /// Lag (seconds) at which the matrix is taken.
    #[arg(long, default_value_t = 60)]
    pub tau: u32,
}

#[derive(Serialize)]
struct MatrixSidecar {
    tau: u32,
    convention: ZeroConvention,
    max_abs: f64,
    symbols: Vec<Symbol>,
    sector_boundaries: Vec<SectorSpan>,
    diagonal: Vec<Option<f64>>,
}

pub fn run(config: &RunConfig, args: MatrixArgs) -> Result<(), Failure> {
    let store = load_store(&config.output_dir).map_err(Failure::missing_input)?;
    if store.is_empty() {
        return Err(Failure::missing_input(anyhow!(
            "no series found under {}; run `xresponse response` first",
            config.output_dir.display()
        )));
    }
    let map = load_sector_map(config)?;
    let symbols: Vec<Symbol> = store.symbols().into_iter().collect();
    let (ordered, spans) = order_by_sector(&symbols, &map);

    for convention in config.convention.conventions() {
        let matrix = response_matrix(&ordered, spans.clone(), args.tau, convention, &store)
            .map_err(|e| match e {
                AggregateError::DegenerateMax => Failure::degenerate(e),
                AggregateError::MissingPairSeries(_) => Failure::missing_input(anyhow!(
                    "at tau={} ({}): {e}; recompute responses with --lags including this lag",
                    args.tau,
                    convention.token()
                )),
                other => Failure::from(anyhow::Error::from(other)),
            })?;
        let stem = format!("matrix_tau{}_{}", args.tau, convention.token());
        let mut csv = Vec::new();
        matrix
            .write_csv(&mut csv, Some(&config.provenance()))
            .map_err(anyhow::Error::from)?;
        write_text(&config.output_dir.join(format!("{stem}.csv")), &csv)?;
        write_json(
            &config.output_dir.join(format!("{stem}.json")),
            config,
            &MatrixSidecar {
                tau: matrix.tau,
                convention: matrix.convention,
                max_abs: matrix.max_abs,
                symbols: matrix.symbols.clone(),
                sector_boundaries: matrix.sector_spans.clone(),
                diagonal: matrix.diagonal.clone(),
            },
        )?;
        println!("{stem}: {}x{} entries, max_abs={}", matrix.n(), matrix.n(), matrix.max_abs);
    }
    Ok(())
}
