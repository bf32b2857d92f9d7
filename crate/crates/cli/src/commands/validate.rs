//! `xresponse validate`: machine-check of the zero-sign scaling identities
//! on every computed pair and average.
//!
//! For a pair series computed over identical valid windows, the
//! include-zeros value must equal the windowed nonzero fraction
//! `f = n_exc / n_inc` times the exclude-zeros value. For averages, the
//! active include-zeros average is `f_j` times the exclude-zeros average,
//! and the passive include-zeros average is the `f_j`-weighted mean of the
//! exclude-zeros pairwise values. Deviations are relative to
//! `max(|include-zeros value|, 1e-15)`; anything above 1e-9 fails the run.

use std::collections::BTreeMap;

use anyhow::anyhow;
use xresponse_core::aggregate::{AverageSeries, Direction, SeriesStore};
use xresponse_core::response::SeriesKind;
use xresponse_core::types::Symbol;
use xresponse_core::ZeroConvention;

use crate::artifacts::{load_averages, load_store};
use crate::config::RunConfig;
use crate::failure::Failure;

const TOLERANCE: f64 = 1e-9;
const FLOOR: f64 = 1e-15;

struct Report {
    max_deviation: f64,
    checks: u64,
    violations: Vec<String>,
}

impl Report {
    fn new() -> Self {
        Report { max_deviation: 0.0, checks: 0, violations: Vec::new() }
    }

    fn record(&mut self, deviation: f64, context: impl FnOnce() -> String) {
        self.checks += 1;
        if deviation > self.max_deviation {
            self.max_deviation = deviation;
        }
        if deviation > TOLERANCE {
            self.violations.push(format!("{} (deviation {deviation:.3e})", context()));
        }
    }
}

fn relative_deviation(inc_value: f64, scaled_exc: f64) -> f64 {
    (inc_value - scaled_exc).abs() / inc_value.abs().max(FLOOR)
}

/// Pairwise identity: value_inc = (n_exc / n_inc) * value_exc at each lag.
fn check_pairs(store: &SeriesStore<f64>, report: &mut Report) {
    let mut seen: BTreeMap<(SeriesKind, Symbol, Symbol), ()> = BTreeMap::new();
    for (key, _) in store.iter() {
        seen.entry((key.kind, key.i.clone(), key.j.clone())).or_insert(());
    }
    for (kind, i, j) in seen.keys().cloned() {
        let (Some(inc), Some(exc)) = (
            store.get(kind, ZeroConvention::IncludeZeros, &i, &j),
            store.get(kind, ZeroConvention::ExcludeZeros, &i, &j),
        ) else {
            continue;
        };
        for p_inc in &inc.points {
            let Some(p_exc) = exc.get(p_inc.tau) else { continue };
            let f = p_exc.n_samples as f64 / p_inc.n_samples as f64;
            let dev = relative_deviation(p_inc.value, f * p_exc.value);
            report.record(dev, || format!("pair ({i}, {j}) {kind} tau={}", p_inc.tau));
        }
    }
}

/// Windowed nonzero fraction of the impacting stock from one pairwise
/// series pair, as an exact count ratio.
fn window_fraction(
    store: &SeriesStore<f64>,
    kind: SeriesKind,
    i: &Symbol,
    j: &Symbol,
    tau: u32,
) -> Option<(u64, u64)> {
    let inc = store.get(kind, ZeroConvention::IncludeZeros, i, j)?.get(tau)?;
    let exc = store.get(kind, ZeroConvention::ExcludeZeros, i, j)?.get(tau)?;
    Some((exc.n_samples, inc.n_samples))
}

/// Average identities, applicable when the pairwise windows coincide.
fn check_averages(
    store: &SeriesStore<f64>,
    averages: &[AverageSeries<f64>],
    report: &mut Report,
) {
    let mut by_key: BTreeMap<(SeriesKind, Direction, Symbol, ZeroConvention), &AverageSeries<f64>> =
        BTreeMap::new();
    for avg in averages {
        by_key.insert((avg.kind, avg.direction, avg.anchor.clone(), avg.convention), avg);
    }
    for ((kind, direction, anchor, convention), avg_inc) in &by_key {
        if *convention != ZeroConvention::IncludeZeros {
            continue;
        }
        let Some(avg_exc) = by_key.get(&(
            *kind,
            *direction,
            anchor.clone(),
            ZeroConvention::ExcludeZeros,
        )) else {
            continue;
        };
        for p_inc in &avg_inc.points {
            let tau = p_inc.tau;
            let Some(p_exc) = avg_exc.get(tau) else { continue };
            match direction {
                Direction::Active => {
                    // f_j is common to all pairs (i, j): take it from each
                    // partner pair and require exact agreement as count
                    // ratios before applying the proportionality.
                    let mut fractions = avg_inc.universe.iter().filter_map(|partner| {
                        window_fraction(store, *kind, partner, anchor, tau)
                    });
                    let Some((e0, n0)) = fractions.next() else { continue };
                    let coincide = fractions.all(|(e, n)| e as u128 * n0 as u128 == e0 as u128 * n as u128);
                    if !coincide {
                        continue;
                    }
                    let f_j = e0 as f64 / n0 as f64;
                    let dev = relative_deviation(p_inc.value, f_j * p_exc.value);
                    report.record(dev, || {
                        format!("active average {anchor} {kind} tau={tau}")
                    });
                }
                Direction::Passive => {
                    // Weighted mean of exclude-zeros pairwise values with
                    // per-partner window fractions.
                    let mut weighted_sum = 0.0;
                    let mut count = 0u64;
                    let mut complete = true;
                    for partner in &avg_inc.universe {
                        let pair_exc = store
                            .get(*kind, ZeroConvention::ExcludeZeros, anchor, partner)
                            .and_then(|s| s.get(tau));
                        let frac = window_fraction(store, *kind, anchor, partner, tau);
                        match (pair_exc, frac) {
                            (Some(p), Some((e, n))) => {
                                weighted_sum += (e as f64 / n as f64) * p.value;
                                count += 1;
                            }
                            _ => {
                                complete = false;
                                break;
                            }
                        }
                    }
                    if !complete || count == 0 {
                        continue;
                    }
                    let rhs = weighted_sum / count as f64;
                    let dev = relative_deviation(p_inc.value, rhs);
                    report.record(dev, || {
                        format!("passive average {anchor} {kind} tau={tau}")
                    });
                }
            }
        }
    }
}

pub fn run(config: &RunConfig) -> Result<(), Failure> {
    let store = load_store(&config.output_dir).map_err(Failure::missing_input)?;
    let averages = load_averages(&config.output_dir).map_err(Failure::missing_input)?;
    if store.is_empty() && averages.is_empty() {
        println!("nothing to validate under {}", config.output_dir.display());
        return Ok(());
    }

    let mut report = Report::new();
    check_pairs(&store, &mut report);
    check_averages(&store, &averages, &mut report);

    println!(
        "validated {} identity checks; max relative deviation {:.3e}",
        report.checks, report.max_deviation
    );
    if report.violations.is_empty() {
        Ok(())
    } else {
        for v in &report.violations {
            eprintln!("violation: {v}");
        }
        Err(Failure::validation(anyhow!(
            "{} identity violation(s), worst {:.3e} (tolerance {TOLERANCE:.0e})",
            report.violations.len(),
            report.max_deviation
        )))
    }
}
