//! `xresponse synth`: generate a synthetic universe into the data directory.

use std::path::PathBuf;

use anyhow::{anyhow, Context};
use serde::Deserialize;
use xresponse_core::synth::{generate_to_dir, SynthConfig};
use xresponse_core::types::Day;

use crate::config::RunConfig;
use crate::failure::Failure;

#[derive(clap::Args)]
pub struct SynthArgs {
    /// Generator TOML; omitted = the default 4-stock, 5-day, seed-42
    /// verification universe.
    #[arg(long)]
    pub synth_config: Option<PathBuf>,
    /// Override the seed of whichever config is in effect.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the number of days.
    #[arg(long)]
    pub n_days: Option<usize>,
    /// Override the quote noise level.
    #[arg(long)]
    pub noise_sigma: Option<f64>,
}

/// TOML-facing schema: scalar probabilities broadcast to all stocks, and
/// `impact_self`/`impact_cross` expand to the full matrix unless an
/// explicit `impact` matrix is given.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthFile {
    n_stocks: usize,
    n_days: usize,
    seed: u64,
    trade_prob: FloatOrVec,
    persist_prob: FloatOrVec,
    impact: Option<Vec<Vec<f64>>>,
    impact_self: Option<f64>,
    impact_cross: Option<f64>,
    #[serde(default)]
    noise_sigma: f64,
    #[serde(default = "default_base_price")]
    base_price: f64,
    #[serde(default = "default_spread")]
    spread: f64,
    start_day: Option<String>,
}

fn default_base_price() -> f64 {
    100.0
}

fn default_spread() -> f64 {
    0.20
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FloatOrVec {
    One(f64),
    Many(Vec<f64>),
}

impl FloatOrVec {
    fn broadcast(self, n: usize) -> Vec<f64> {
        match self {
            FloatOrVec::One(v) => vec![v; n],
            FloatOrVec::Many(v) => v,
        }
    }
}

impl SynthFile {
    fn into_config(self) -> Result<SynthConfig, Failure> {
        let n = self.n_stocks;
        let impact = match (self.impact, self.impact_self, self.impact_cross) {
            (Some(matrix), _, _) => matrix,
            (None, diag, cross) => {
                let diag = diag.unwrap_or(5e-5);
                let cross = cross.unwrap_or(1e-5);
                (0..n)
                    .map(|i| (0..n).map(|j| if i == j { diag } else { cross }).collect())
                    .collect()
            }
        };
        let start_day: Day = match self.start_day {
            Some(s) => s.parse().map_err(Failure::parse)?,
            None => Day::new(2008, 1, 2).expect("valid date"),
        };
        Ok(SynthConfig {
            n_stocks: n,
            n_days: self.n_days,
            seed: self.seed,
            trade_prob: self.trade_prob.broadcast(n),
            persist_prob: self.persist_prob.broadcast(n),
            impact,
            noise_sigma: self.noise_sigma,
            base_price: self.base_price,
            spread: self.spread,
            start_day,
        })
    }
}

pub fn run(config: &RunConfig, args: SynthArgs) -> Result<(), Failure> {
    let mut synth_config = match &args.synth_config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))
                .map_err(Failure::parse)?;
            let file: SynthFile = toml::from_str(&text)
                .with_context(|| format!("cannot parse {}", path.display()))
                .map_err(Failure::parse)?;
            file.into_config()?
        }
        None => SynthConfig::default_universe(),
    };
    if let Some(seed) = args.seed {
        synth_config.seed = seed;
    }
    if let Some(n_days) = args.n_days {
        synth_config.n_days = n_days;
    }
    if let Some(noise) = args.noise_sigma {
        synth_config.noise_sigma = noise;
    }
    synth_config
        .validate()
        .map_err(|e| Failure::parse(anyhow!(e)))?;

    let session = config.session_window().map_err(Failure::parse)?;
    let manifest = generate_to_dir(&synth_config, &session, &config.data_dir)
        .map_err(|e| Failure::parse(anyhow!(e)))?;
    println!(
        "generated {} stocks x {} days (seed {}) into {}; config hash {}",
        synth_config.n_stocks,
        synth_config.n_days,
        synth_config.seed,
        config.data_dir.display(),
        manifest.config_hash
    );
    Ok(())
}
