//! Synthetic multi-stock tick data with known sign persistence and
//! cross-impact, plus the closed-form response expectation used to verify
//! the measurement pipeline end to end.
//!
//! # Generator
//!
//! Time runs over the session grid, one second per step, each day
//! independent. Per second `t`:
//!
//! 1. Every stock posts a quote at `t`: `bid/ask = midprice -/+ spread/2`,
//!    where `midprice = exp(log_mid)` reflects impacts applied through
//!    second `t-1` only.
//! 2. Every stock `j` trades with probability `trade_prob[j]` (at most one
//!    trade per second). The trade sign follows a Markov chain over that
//!    stock's trades: it equals the previous trade's sign with probability
//!    `persist_prob[j]`, drawn as copy / flip / fresh-uniform moves so the
//!    equality probability is exact. The first trade of a day is uniform.
//!    A buy prints at the current ask, a sell at the current bid.
//! 3. After trades, log-midprices advance:
//!    `log_mid[i] += sum_j impact[i][j] * sign_j(t) + noise`.
//!
//! Trades printing at the pre-impact quote side make the price-comparison
//! sign classifier recover generated signs whenever the price changes,
//! with equal-price inheritance covering repeats.
//!
//! # Closed-form response expectation
//!
//! Write `p = trade_prob[j]`, `q = persist_prob[j]`, and `eps_j(t)` for the
//! generated per-second sign (0 on no trade). The sign chain moves by
//! copy with probability `max(0, 2q-1)`, flip with `max(0, 1-2q)`, and a
//! fresh uniform draw otherwise, so consecutive trade signs satisfy
//! `P(equal) = q` exactly and one chain step carries correlation
//! `a = 2q - 1`.
//!
//! The per-second sign autocovariance follows by conditioning on trade
//! occurrences. Both ends must trade (probability `p^2`); with `s - 1`
//! intermediate seconds each independently trading with probability `p`,
//! the number of chain steps between the end trades is `1 + M` with
//! `M ~ Binomial(s-1, p)`, and a chain of `k` steps carries correlation
//! `a^k`. Hence, for `s >= 1`:
//!
//! ```text
//! C(s) = E[eps(t+s) eps(t)] = p^2 a E[a^M] = p^2 a b^(s-1),
//! b    = 1 - p + p a = 1 - p (1 - a),
//! C(0) = E[eps(t)^2] = p.
//! ```
//!
//! A trade of stock `j` at second `s` moves `log_mid[i]` at second `s+1`,
//! so the log-return of stock `i` over `[t, t+tau]` collects the impacts
//! of seconds `t .. t+tau-1`. Cross-stock chains are independent and the
//! noise has zero mean, leaving:
//!
//! ```text
//! E[r_i(t, tau) eps_j(t)] = impact[i][j] * sum_{s=0}^{tau-1} C_j(s)
//!   = impact[i][j] * (p + p^2 a (1 - b^(tau-1)) / (1 - b))      (b < 1)
//!   = impact[i][j] * (p + p^2 a (tau - 1))                      (b = 1)
//! ```
//!
//! This is the include-zeros response: the expectation runs over all
//! seconds. [`expected_response`] evaluates it; with `q = 1/2` (`a = 0`)
//! only the contemporaneous term survives and the response is flat at
//! `impact * p`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{
    write_quotes_csv, write_trades_csv, QuoteRecord, SessionWindow, TickTable, TradeRecord,
};
use crate::types::{Day, Symbol};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ten sector labels recycled for synthetic universes.
const SECTOR_CYCLE: [&str; 10] = ["I", "HC", "CD", "IT", "U", "F", "M", "E", "CS", "TS"];

/// Generator configuration.
///
/// `trade_prob`, `persist_prob` are per-stock; `impact[i][j]` is the
/// log-price impact on stock `i` per unit sign of stock `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_stocks: usize,
    pub n_days: usize,
    pub seed: u64,
    pub trade_prob: Vec<f64>,
    pub persist_prob: Vec<f64>,
    pub impact: Vec<Vec<f64>>,
    pub noise_sigma: f64,
    pub base_price: f64,
    pub spread: f64,
    /// First calendar day; subsequent days are consecutive.
    pub start_day: Day,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig::default_universe()
    }
}

impl SynthConfig {
    /// The default verification universe: 4 stocks, 5 days, seed 42,
    /// heterogeneous trading frequencies and persistences, self-impact
    /// ten times the cross-impact, no quote noise. The self-impact margin
    /// keeps same-sign repeats classifiable across long trade gaps where
    /// accumulated cross-impact drift would otherwise flip the price
    /// comparison.
    pub fn default_universe() -> Self {
        let n = 4;
        let impact = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { 1e-4 } else { 1e-5 })
                    .collect()
            })
            .collect();
        SynthConfig {
            n_stocks: n,
            n_days: 5,
            seed: 42,
            trade_prob: vec![0.50, 0.40, 0.30, 0.20],
            persist_prob: vec![0.70, 0.60, 0.55, 0.50],
            impact,
            noise_sigma: 0.0,
            base_price: 100.0,
            spread: 0.20,
            start_day: Day::new(2008, 1, 2).expect("valid date"),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |msg: String| Err(SynthError::InvalidConfig(msg));
        if self.n_stocks == 0 || self.n_days == 0 {
            return fail("n_stocks and n_days must be positive".into());
        }
        if self.trade_prob.len() != self.n_stocks || self.persist_prob.len() != self.n_stocks {
            return fail(format!(
                "trade_prob/persist_prob must have {} entries",
                self.n_stocks
            ));
        }
        for p in self.trade_prob.iter().chain(&self.persist_prob) {
            if !(0.0..=1.0).contains(p) {
                return fail(format!("probability {p} outside [0, 1]"));
            }
        }
        if self.impact.len() != self.n_stocks
            || self.impact.iter().any(|row| row.len() != self.n_stocks)
        {
            return fail(format!("impact must be {0}x{0}", self.n_stocks));
        }
        if self.impact.iter().flatten().any(|l| !l.is_finite()) {
            return fail("impact entries must be finite".into());
        }
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 {
            return fail("noise_sigma must be >= 0".into());
        }
        if self.base_price.is_nan() || self.base_price <= 0.0 {
            return fail("base_price and spread must be positive".into());
        }
        if self.spread.is_nan() || self.spread <= 0.0 {
            return fail("base_price and spread must be positive".into());
        }
        Ok(())
    }

    /// Synthetic symbols `SYN00..`, in index order.
    pub fn symbols(&self) -> Vec<Symbol> {
        (0..self.n_stocks)
            .map(|i| Symbol::new(format!("SYN{i:02}")).expect("valid symbol"))
            .collect()
    }

    /// Consecutive calendar days starting at `start_day`.
    pub fn days(&self) -> Vec<Day> {
        let mut days = Vec::with_capacity(self.n_days);
        let mut d = self.start_day;
        for _ in 0..self.n_days {
            days.push(d);
            d = d.succ();
        }
        days
    }

    /// FNV-1a of the canonical JSON encoding; stable across runs.
    pub fn config_hash(&self) -> String {
        let encoded = serde_json::to_string(self).expect("config serializes");
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in encoded.as_bytes() {
            hash ^= u64::from(*byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{hash:016x}")
    }
}

/// One generated stock-day, with the ground-truth signs per second.
#[derive(Debug, Clone)]
pub struct GeneratedDay {
    pub table: TickTable<f64>,
    /// `(second, sign)` of every generated trade.
    pub signs: Vec<(u32, i8)>,
}

/// Full in-memory output of one generator run.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub session: SessionWindow,
    /// Keyed by (symbol, day); iteration order is deterministic.
    pub days: BTreeMap<(Symbol, Day), GeneratedDay>,
}

/// Runs the generator. Deterministic: a seed fixes every byte of output.
pub fn generate(config: &SynthConfig, session: &SessionWindow) -> Result<SynthOutput, SynthError> {
    config.validate()?;
    let n = config.n_stocks;
    let grid_len = session.grid_len();
    let symbols = config.symbols();
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let noise = (config.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, config.noise_sigma).expect("valid sigma"));

    // Sign-move thresholds per stock: copy / flip / fresh-uniform.
    let copy_prob: Vec<f64> = config.persist_prob.iter().map(|&q| (2.0 * q - 1.0).max(0.0)).collect();
    let flip_prob: Vec<f64> = config.persist_prob.iter().map(|&q| (1.0 - 2.0 * q).max(0.0)).collect();

    let mut days = BTreeMap::new();
    for day in config.days() {
        let mut log_mid = vec![config.base_price.ln(); n];
        let mut prev_sign: Vec<Option<i8>> = vec![None; n];
        let mut trades: Vec<Vec<TradeRecord<f64>>> = vec![Vec::new(); n];
        let mut quotes: Vec<Vec<QuoteRecord<f64>>> =
            vec![Vec::with_capacity(grid_len); n];
        let mut signs: Vec<Vec<(u32, i8)>> = vec![Vec::new(); n];

        for t in 0..grid_len as u32 {
            // Quotes carry the pre-trade midprice of this second.
            let mut bid_ask = Vec::with_capacity(n);
            for (j, lm) in log_mid.iter().enumerate() {
                let mid = lm.exp();
                let bid = round_price(mid - config.spread / 2.0);
                let ask = round_price(mid + config.spread / 2.0);
                quotes[j].push(QuoteRecord { timestamp: t, sequence: 0, bid, ask });
                bid_ask.push((bid, ask));
            }

            // Trades, then their impact on the next second's midprices.
            let mut second_signs = vec![0i8; n];
            for j in 0..n {
                if rng.random::<f64>() >= config.trade_prob[j] {
                    continue;
                }
                let sign = match prev_sign[j] {
                    None => draw_uniform_sign(&mut rng),
                    Some(prev) => {
                        let u = rng.random::<f64>();
                        if u < copy_prob[j] {
                            prev
                        } else if u < copy_prob[j] + flip_prob[j] {
                            -prev
                        } else {
                            draw_uniform_sign(&mut rng)
                        }
                    }
                };
                prev_sign[j] = Some(sign);
                second_signs[j] = sign;
                let price = if sign > 0 { bid_ask[j].1 } else { bid_ask[j].0 };
                let volume = rng.random_range(100..=1000);
                trades[j].push(TradeRecord { timestamp: t, sequence: 0, price, volume });
                signs[j].push((t, sign));
            }

            for (i, lm) in log_mid.iter_mut().enumerate() {
                let mut delta = 0.0;
                for (j, &sign) in second_signs.iter().enumerate() {
                    if sign != 0 {
                        delta += config.impact[i][j] * f64::from(sign);
                    }
                }
                if let Some(dist) = &noise {
                    delta += dist.sample(&mut rng);
                }
                *lm += delta;
            }
        }

        for (j, symbol) in symbols.iter().enumerate() {
            days.insert(
                (symbol.clone(), day),
                GeneratedDay {
                    table: TickTable {
                        symbol: symbol.clone(),
                        day,
                        trades: std::mem::take(&mut trades[j]),
                        quotes: std::mem::take(&mut quotes[j]),
                    },
                    signs: std::mem::take(&mut signs[j]),
                },
            );
        }
    }
    Ok(SynthOutput { session: *session, days })
}

fn draw_uniform_sign<R: Rng>(rng: &mut R) -> i8 {
    if rng.random::<bool>() {
        1
    } else {
        -1
    }
}

/// Prices are written with four decimals; rounding here keeps the
/// in-memory values identical to what a reparse of the files yields.
fn round_price(p: f64) -> f64 {
    (p * 10_000.0).round() / 10_000.0
}

/// Closed-form include-zeros response expectation `E[r_i(t,tau) eps_j(t)]`
/// under the generator; see the module docs for the derivation.
pub fn expected_response(
    config: &SynthConfig,
    i: usize,
    j: usize,
    tau: u32,
) -> Result<f64, SynthError> {
    config.validate()?;
    if i >= config.n_stocks || j >= config.n_stocks {
        return Err(SynthError::InvalidConfig(format!(
            "stock index out of range: ({i}, {j})"
        )));
    }
    if tau == 0 {
        return Ok(0.0);
    }
    let lambda = config.impact[i][j];
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let p = config.trade_prob[j];
    let a = 2.0 * config.persist_prob[j] - 1.0;
    let b = 1.0 - p * (1.0 - a);
    // sum_{s=0}^{tau-1} C(s) with C(0) = p, C(s) = p^2 a b^(s-1).
    let tail = if tau == 1 {
        0.0
    } else if (1.0 - b).abs() < 1e-15 {
        p * p * a * (tau - 1) as f64
    } else {
        p * p * a * (1.0 - b.powi(tau as i32 - 1)) / (1.0 - b)
    };
    Ok(lambda * (p + tail))
}

/// Per-second sign autocovariance `C_j(s)` of the generator, exposed for
/// verification against measured correlators.
pub fn expected_sign_autocovariance(config: &SynthConfig, j: usize, s: u32) -> f64 {
    let p = config.trade_prob[j];
    if s == 0 {
        return p;
    }
    let a = 2.0 * config.persist_prob[j] - 1.0;
    let b = 1.0 - p * (1.0 - a);
    p * p * a * b.powi(s as i32 - 1)
}

/// Manifest written next to generated data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config_hash: String,
    pub config: SynthConfig,
    pub files: Vec<String>,
}

/// File layout used under the data directory.
pub fn trades_path(dir: &Path, symbol: &Symbol, day: Day) -> PathBuf {
    dir.join(symbol.as_str()).join(format!("{day}.trades.csv"))
}

pub fn quotes_path(dir: &Path, symbol: &Symbol, day: Day) -> PathBuf {
    dir.join(symbol.as_str()).join(format!("{day}.quotes.csv"))
}

pub fn signs_path(dir: &Path, symbol: &Symbol, day: Day) -> PathBuf {
    dir.join(symbol.as_str()).join(format!("{day}.signs.csv"))
}

/// Writes a generated universe to disk in the exact CSV formats the ingest
/// stage consumes, plus ground-truth sign sidecars, a sector map cycling
/// through the ten standard labels, and a manifest with the seed and
/// config hash.
pub fn write_output(
    output: &SynthOutput,
    config: &SynthConfig,
    dir: &Path,
) -> Result<Manifest, SynthError> {
    let mut files = Vec::new();
    for ((symbol, day), generated) in &output.days {
        let sym_dir = dir.join(symbol.as_str());
        fs::create_dir_all(&sym_dir)?;

        let t_path = trades_path(dir, symbol, *day);
        let mut buf = Vec::new();
        write_trades_csv(&generated.table.trades, &output.session, &mut buf)?;
        fs::write(&t_path, &buf)?;
        files.push(rel(dir, &t_path));

        let q_path = quotes_path(dir, symbol, *day);
        let mut buf = Vec::new();
        write_quotes_csv(&generated.table.quotes, &output.session, &mut buf)?;
        fs::write(&q_path, &buf)?;
        files.push(rel(dir, &q_path));

        let s_path = signs_path(dir, symbol, *day);
        let mut buf = Vec::new();
        writeln!(buf, "second,sign")?;
        for (t, sign) in &generated.signs {
            writeln!(buf, "{t},{sign}")?;
        }
        fs::write(&s_path, &buf)?;
        files.push(rel(dir, &s_path));
    }

    let mut sector_buf = String::new();
    for (idx, symbol) in config.symbols().iter().enumerate() {
        sector_buf.push_str(&format!(
            "{},{}\n",
            symbol,
            SECTOR_CYCLE[idx % SECTOR_CYCLE.len()]
        ));
    }
    fs::write(dir.join("sectors.csv"), sector_buf)?;
    files.push("sectors.csv".to_owned());

    files.sort();
    let manifest = Manifest {
        seed: config.seed,
        config_hash: config.config_hash(),
        config: config.clone(),
        files,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(dir.join("manifest.json"), manifest_json)?;
    Ok(manifest)
}

fn rel(base: &Path, p: &Path) -> String {
    p.strip_prefix(base)
        .unwrap_or(p)
        .to_string_lossy()
        .replace('\\', "/")
}

/// Convenience: generate and write in one call.
pub fn generate_to_dir(
    config: &SynthConfig,
    session: &SessionWindow,
    dir: &Path,
) -> Result<Manifest, SynthError> {
    let output = generate(config, session)?;
    write_output(&output, config, dir)
}

/// Monte-Carlo estimate of `E[r_i(t,tau) eps_j(t)]` by direct simulation
/// of the generator's sign/impact mechanism (no files, no classifier).
/// Returns `(mean, stderr)`. Test oracle for [`expected_response`].
pub fn monte_carlo_response(
    config: &SynthConfig,
    i: usize,
    j: usize,
    tau: u32,
    n_samples: u64,
    seed: u64,
) -> (f64, f64) {
    let mut rng = SmallRng::seed_from_u64(seed);
    let n = config.n_stocks;
    let horizon = tau as usize + 1;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    // Warm the chains long enough that the window statistics are
    // representative, then read one sample per replica.
    for _ in 0..n_samples {
        let mut prev: Vec<Option<i8>> = vec![None; n];
        let mut eps = vec![0i8; n];
        // warm-up steps bring the chain into its stationary regime
        for _ in 0..8 {
            step_signs(config, &mut rng, &mut prev, &mut eps);
        }
        step_signs(config, &mut rng, &mut prev, &mut eps);
        let eps_j = eps[j];
        let mut r = 0.0;
        for _ in 0..horizon - 1 {
            for (k, &e) in eps.iter().enumerate() {
                if e != 0 {
                    r += config.impact[i][k] * f64::from(e);
                }
            }
            step_signs(config, &mut rng, &mut prev, &mut eps);
        }
        let sample = r * f64::from(eps_j);
        sum += sample;
        sum_sq += sample * sample;
    }
    let nf = n_samples as f64;
    let mean = sum / nf;
    let var = ((sum_sq - sum * sum / nf) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

fn step_signs(
    config: &SynthConfig,
    rng: &mut SmallRng,
    prev: &mut [Option<i8>],
    eps: &mut [i8],
) {
    for j in 0..config.n_stocks {
        eps[j] = 0;
        if rng.random::<f64>() >= config.trade_prob[j] {
            continue;
        }
        let q = config.persist_prob[j];
        let copy = (2.0 * q - 1.0).max(0.0);
        let flip = (1.0 - 2.0 * q).max(0.0);
        let sign = match prev[j] {
            None => {
                if rng.random::<bool>() {
                    1
                } else {
                    -1
                }
            }
            Some(p) => {
                let u = rng.random::<f64>();
                if u < copy {
                    p
                } else if u < copy + flip {
                    -p
                } else if rng.random::<bool>() {
                    1
                } else {
                    -1
                }
            }
        };
        prev[j] = Some(sign);
        eps[j] = sign;
    }
}
