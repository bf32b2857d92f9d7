//! Pairwise response functions and trade-sign cross-correlators.
//!
//! For a stock pair `(i, j)` and lag `tau`, the cross-response averages the
//! log-midpoint change of stock `i` over `[t, t+tau]` against the sign of
//! stock `j`'s trades at `t`; the sign cross-correlator averages
//! `eps_i(t+tau) * eps_j(t)`. Both come in two zero-sign conventions that
//! share one numerator and differ only in the denominator:
//!
//! * `include_zeros` averages over every valid `t` (absence of trading
//!   dilutes the response);
//! * `exclude_zeros` averages only over `t` with `eps_j(t) != 0`.
//!
//! A second `t` is valid at lag `tau` when `t` and `t+tau` fall inside the
//! same session day and, for responses, the midpoint of stock `i` exists at
//! both ends. Both conventions are accumulated in a single pass over the
//! identical valid-window set, which makes the scaling identity
//! `R_inc = f_win * R_exc` (with `f_win` the windowed nonzero-sign
//! fraction) hold to floating-point rounding rather than approximately.
//! Days never mix: every sample lies inside one session day, and per-day
//! partial sums are merged in ascending day order.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{mean_and_stderr, KahanSum};
use crate::scalar::Scalar;
use crate::signs::SecondGrid;
use crate::types::{Day, InvalidValue, Symbol};

#[derive(Debug, Error)]
pub enum ResponseError {
    #[error("lag spec: {0}")]
    BadLagSpec(String),
    #[error("grids for {i} and {j} cover different day sets")]
    MismatchedDays { i: Symbol, j: Symbol },
    #[error("grids for {0} mix symbols or grid lengths")]
    InconsistentGrids(Symbol),
    #[error("no valid samples at any requested lag")]
    NoValidSamples,
    #[error(transparent)]
    Invalid(#[from] InvalidValue),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ordered set of time lags, in grid seconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagSpec {
    lags: Vec<u32>,
}

impl LagSpec {
    /// Lags used when nothing else is requested: roughly log-spaced from
    /// 1 s to under 1000 s, so decay curves sample evenly on a log axis.
    pub const DEFAULT_LAGS: [u32; 15] =
        [1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233, 377, 610, 987];

    /// Validates strict ascending order and `max < grid_len`. Lag 0 is
    /// permitted (the correlator anchor needs it); response series
    /// conventionally start at 1 since a zero-lag return is identically 0.
    pub fn new(lags: Vec<u32>, grid_len: usize) -> Result<Self, ResponseError> {
        if lags.is_empty() {
            return Err(ResponseError::BadLagSpec("empty lag set".into()));
        }
        if !lags.windows(2).all(|w| w[0] < w[1]) {
            return Err(ResponseError::BadLagSpec(
                "lags must be strictly increasing".into(),
            ));
        }
        let max = *lags.last().expect("non-empty");
        if max as usize >= grid_len {
            return Err(ResponseError::BadLagSpec(format!(
                "max lag {max} does not fit a {grid_len}-second grid"
            )));
        }
        Ok(LagSpec { lags })
    }

    pub fn default_for(grid_len: usize) -> Self {
        let lags: Vec<u32> = Self::DEFAULT_LAGS
            .iter()
            .copied()
            .filter(|&l| (l as usize) < grid_len)
            .collect();
        LagSpec { lags }
    }

    /// Parses a lag expression: either a comma list `1,2,60,300` or a
    /// range `a:b:log[:n]` / `a:b:lin[:n]` with n points (default 30),
    /// deduplicated to integers.
    pub fn parse(expr: &str, grid_len: usize) -> Result<Self, ResponseError> {
        let expr = expr.trim();
        if expr.contains(':') {
            let parts: Vec<&str> = expr.split(':').collect();
            if parts.len() < 3 || parts.len() > 4 {
                return Err(ResponseError::BadLagSpec(format!(
                    "expected a:b:log[:n] or a:b:lin[:n], got {expr:?}"
                )));
            }
            let a: u32 = parts[0]
                .parse()
                .map_err(|_| ResponseError::BadLagSpec(expr.to_owned()))?;
            let b: u32 = parts[1]
                .parse()
                .map_err(|_| ResponseError::BadLagSpec(expr.to_owned()))?;
            let n: usize = match parts.get(3) {
                Some(p) => p
                    .parse()
                    .map_err(|_| ResponseError::BadLagSpec(expr.to_owned()))?,
                None => 30,
            };
            if a == 0 || b <= a || n < 2 {
                return Err(ResponseError::BadLagSpec(expr.to_owned()));
            }
            let lags = match parts[2] {
                "log" => log_spaced_lags(a, b, n),
                "lin" => lin_spaced_lags(a, b, n),
                other => {
                    return Err(ResponseError::BadLagSpec(format!(
                        "unknown spacing {other:?}"
                    )))
                }
            };
            LagSpec::new(lags, grid_len)
        } else {
            let mut lags = Vec::new();
            for item in expr.split(',') {
                let lag: u32 = item
                    .trim()
                    .parse()
                    .map_err(|_| ResponseError::BadLagSpec(format!("bad lag {item:?}")))?;
                lags.push(lag);
            }
            LagSpec::new(lags, grid_len)
        }
    }

    pub fn lags(&self) -> &[u32] {
        &self.lags
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.lags.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }
}

/// `n` distinct integers spanning `[a, b]` geometrically; duplicates from
/// rounding are bumped to the next free integer.
pub fn log_spaced_lags(a: u32, b: u32, n: usize) -> Vec<u32> {
    let (la, lb) = ((a as f64).ln(), (b as f64).ln());
    let mut out: Vec<u32> = Vec::with_capacity(n);
    for k in 0..n {
        let f = la + (lb - la) * k as f64 / (n - 1) as f64;
        let mut lag = f.exp().round() as u32;
        if let Some(&last) = out.last() {
            lag = lag.max(last + 1);
        }
        if lag > b {
            break;
        }
        out.push(lag);
    }
    out
}

fn lin_spaced_lags(a: u32, b: u32, n: usize) -> Vec<u32> {
    let mut out: Vec<u32> = Vec::with_capacity(n);
    for k in 0..n {
        let f = a as f64 + (b - a) as f64 * k as f64 / (n - 1) as f64;
        let mut lag = f.round() as u32;
        if let Some(&last) = out.last() {
            lag = lag.max(last + 1);
        }
        if lag > b {
            break;
        }
        out.push(lag);
    }
    out
}

/// What a series measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    CrossResponse,
    SelfResponse,
    SignCorrelator,
}

impl fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SeriesKind::CrossResponse => "cross_response",
            SeriesKind::SelfResponse => "self_response",
            SeriesKind::SignCorrelator => "sign_correlator",
        };
        f.write_str(s)
    }
}

/// Treatment of seconds where the impacting stock shows no sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroConvention {
    IncludeZeros,
    ExcludeZeros,
}

impl ZeroConvention {
    /// Short token used in CLI flags and file names.
    pub fn token(&self) -> &'static str {
        match self {
            ZeroConvention::IncludeZeros => "inc0",
            ZeroConvention::ExcludeZeros => "exc0",
        }
    }
}

impl fmt::Display for ZeroConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for ZeroConvention {
    type Err = InvalidValue;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inc0" | "include_zeros" => Ok(ZeroConvention::IncludeZeros),
            "exc0" | "exclude_zeros" => Ok(ZeroConvention::ExcludeZeros),
            other => Err(InvalidValue(format!("unknown convention {other:?}"))),
        }
    }
}

/// One point of a response or correlator series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint<T: Scalar> {
    pub tau: u32,
    pub value: T,
    pub stderr: T,
    pub n_samples: u64,
}

/// A response function or sign correlator for one ordered stock pair.
///
/// Points are strictly ascending in `tau`; lags with no valid samples are
/// omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize",
    deserialize = "T: serde::de::DeserializeOwned"
))]
pub struct ResponseSeries<T: Scalar> {
    pub kind: SeriesKind,
    pub convention: ZeroConvention,
    /// Impacted stock (the one whose price or later sign is read).
    pub i: Symbol,
    /// Impacting stock (the one whose sign conditions the average).
    pub j: Symbol,
    /// Common days the series pooled.
    pub days: Vec<Day>,
    pub points: Vec<SeriesPoint<T>>,
}

impl<T: Scalar> ResponseSeries<T> {
    pub fn get(&self, tau: u32) -> Option<&SeriesPoint<T>> {
        self.points
            .binary_search_by_key(&tau, |p| p.tau)
            .ok()
            .map(|idx| &self.points[idx])
    }

    /// Writes `tau,value,stderr,n` rows; `provenance` lines are emitted as
    /// leading `#` comments.
    pub fn write_csv<W: Write>(&self, mut w: W, provenance: Option<&str>) -> std::io::Result<()> {
        if let Some(p) = provenance {
            writeln!(w, "# {p}")?;
        }
        writeln!(w, "tau,value,stderr,n")?;
        for p in &self.points {
            writeln!(w, "{},{},{},{}", p.tau, p.value, p.stderr, p.n_samples)?;
        }
        Ok(())
    }
}

/// Log-price change of one stock over `[t, t+tau]`, absent when either
/// midpoint is missing or the window leaves the grid.
pub fn log_return<T: Scalar>(grid: &SecondGrid<T>, t: usize, tau: u32) -> Option<T> {
    let end = t.checked_add(tau as usize)?;
    if end >= grid.len() {
        return None;
    }
    let m0 = grid.mid[t]?;
    let m1 = grid.mid[end]?;
    Some((m1 / m0).ln())
}

/// Per-lag accumulator for one pass: shared numerator, two denominators.
#[derive(Debug, Clone, Copy, Default)]
struct LagAccum<T: Scalar> {
    sum: KahanSum<T>,
    sum_sq: KahanSum<T>,
    /// Valid window size (include-zeros denominator).
    n_window: u64,
    /// Valid seconds with a nonzero conditioning sign (exclude-zeros
    /// denominator).
    n_nonzero: u64,
}

impl<T: Scalar> LagAccum<T> {
    fn merge(&mut self, other: &Self) {
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
        self.n_window += other.n_window;
        self.n_nonzero += other.n_nonzero;
    }

    fn point(&self, tau: u32, convention: ZeroConvention) -> Option<SeriesPoint<T>> {
        let n = match convention {
            ZeroConvention::IncludeZeros => self.n_window,
            ZeroConvention::ExcludeZeros => self.n_nonzero,
        };
        if n == 0 {
            return None;
        }
        let (value, stderr) = mean_and_stderr(self.sum.value(), self.sum_sq.value(), n);
        Some(SeriesPoint { tau, value, stderr, n_samples: n })
    }
}

/// One day of a pair computation: same-day grids of the two stocks.
type DayPair<'a, T> = (&'a SecondGrid<T>, &'a SecondGrid<T>);

/// Pairs the two grid slices by day, checking coverage and shape.
fn paired_days<'a, T: Scalar>(
    grids_i: &'a [SecondGrid<T>],
    grids_j: &'a [SecondGrid<T>],
) -> Result<Vec<DayPair<'a, T>>, ResponseError> {
    let (Some(first_i), Some(first_j)) = (grids_i.first(), grids_j.first()) else {
        return Err(ResponseError::MismatchedDays {
            i: grids_i.first().map(|g| g.symbol.clone()).unwrap_or_else(|| {
                Symbol::new("?").expect("placeholder symbol")
            }),
            j: grids_j.first().map(|g| g.symbol.clone()).unwrap_or_else(|| {
                Symbol::new("?").expect("placeholder symbol")
            }),
        });
    };
    for g in grids_i {
        if g.symbol != first_i.symbol || g.len() != first_i.len() {
            return Err(ResponseError::InconsistentGrids(first_i.symbol.clone()));
        }
    }
    for g in grids_j {
        if g.symbol != first_j.symbol || g.len() != first_j.len() {
            return Err(ResponseError::InconsistentGrids(first_j.symbol.clone()));
        }
    }
    let mut by_day_i: Vec<&SecondGrid<T>> = grids_i.iter().collect();
    let mut by_day_j: Vec<&SecondGrid<T>> = grids_j.iter().collect();
    by_day_i.sort_by_key(|g| g.day);
    by_day_j.sort_by_key(|g| g.day);
    if by_day_i.len() != by_day_j.len()
        || by_day_i
            .iter()
            .zip(&by_day_j)
            .any(|(a, b)| a.day != b.day || a.len() != b.len())
    {
        return Err(ResponseError::MismatchedDays {
            i: first_i.symbol.clone(),
            j: first_j.symbol.clone(),
        });
    }
    Ok(by_day_i.into_iter().zip(by_day_j).collect())
}

fn build_series<T: Scalar>(
    kind: SeriesKind,
    convention: ZeroConvention,
    i: &Symbol,
    j: &Symbol,
    days: &[Day],
    lags: &LagSpec,
    accums: &[LagAccum<T>],
) -> Result<ResponseSeries<T>, ResponseError> {
    let points: Vec<SeriesPoint<T>> = lags
        .iter()
        .zip(accums)
        .filter_map(|(tau, acc)| acc.point(tau, convention))
        .collect();
    if points.is_empty() {
        return Err(ResponseError::NoValidSamples);
    }
    Ok(ResponseSeries {
        kind,
        convention,
        i: i.clone(),
        j: j.clone(),
        days: days.to_vec(),
        points,
    })
}

fn response_accums<T: Scalar>(
    pairs: &[DayPair<T>],
    lags: &LagSpec,
) -> Vec<LagAccum<T>> {
    let mut accums = vec![LagAccum::<T>::default(); lags.len()];
    for (gi, gj) in pairs {
        // Per-day partials merged in ascending day order keep the reduction
        // deterministic and day-separable.
        let mut day_acc = vec![LagAccum::<T>::default(); lags.len()];
        let len = gi.len();
        for (li, tau) in lags.iter().enumerate() {
            let tau_us = tau as usize;
            if tau_us >= len {
                continue;
            }
            let acc = &mut day_acc[li];
            for t in 0..len - tau_us {
                let (Some(m0), Some(m1)) = (gi.mid[t], gi.mid[t + tau_us]) else {
                    continue;
                };
                acc.n_window += 1;
                let ej = gj.eps[t];
                if ej == 0 {
                    continue;
                }
                acc.n_nonzero += 1;
                let r = (m1 / m0).ln();
                let product = if ej > 0 { r } else { -r };
                acc.sum.add(product);
                acc.sum_sq.add(product * product);
            }
        }
        for (total, day) in accums.iter_mut().zip(&day_acc) {
            total.merge(day);
        }
    }
    accums
}

fn correlator_accums<T: Scalar>(
    pairs: &[DayPair<T>],
    lags: &LagSpec,
) -> Vec<LagAccum<T>> {
    let mut accums = vec![LagAccum::<T>::default(); lags.len()];
    for (gi, gj) in pairs {
        let mut day_acc = vec![LagAccum::<T>::default(); lags.len()];
        let len = gi.len();
        for (li, tau) in lags.iter().enumerate() {
            let tau_us = tau as usize;
            if tau_us >= len {
                continue;
            }
            let acc = &mut day_acc[li];
            for t in 0..len - tau_us {
                acc.n_window += 1;
                let ej = gj.eps[t];
                if ej == 0 {
                    continue;
                }
                acc.n_nonzero += 1;
                let product = (gi.eps[t + tau_us] * ej) as i64;
                if product != 0 {
                    let p = if product > 0 { T::one() } else { -T::one() };
                    acc.sum.add(p);
                    // product^2 == 1 for nonzero sign products
                    acc.sum_sq.add(T::one());
                }
            }
        }
        for (total, day) in accums.iter_mut().zip(&day_acc) {
            total.merge(day);
        }
    }
    accums
}

fn series_days<T: Scalar>(pairs: &[DayPair<T>]) -> Vec<Day> {
    pairs.iter().map(|(g, _)| g.day).collect()
}

/// Cross-response of stock `i` to the signs of stock `j`, both zero-sign
/// conventions from one pass over the identical valid windows.
///
/// With `grids_i == grids_j` this is the self-response (the kind is set
/// accordingly).
pub fn cross_response_both<T: Scalar>(
    grids_i: &[SecondGrid<T>],
    grids_j: &[SecondGrid<T>],
    lags: &LagSpec,
) -> Result<(ResponseSeries<T>, ResponseSeries<T>), ResponseError> {
    let pairs = paired_days(grids_i, grids_j)?;
    let (i, j) = (&pairs[0].0.symbol, &pairs[0].1.symbol);
    let kind = if i == j {
        SeriesKind::SelfResponse
    } else {
        SeriesKind::CrossResponse
    };
    let days = series_days(&pairs);
    let accums = response_accums(&pairs, lags);
    let inc = build_series(kind, ZeroConvention::IncludeZeros, i, j, &days, lags, &accums)?;
    let exc = build_series(kind, ZeroConvention::ExcludeZeros, i, j, &days, lags, &accums)?;
    Ok((inc, exc))
}

/// Cross-response under a single convention.
pub fn cross_response<T: Scalar>(
    grids_i: &[SecondGrid<T>],
    grids_j: &[SecondGrid<T>],
    lags: &LagSpec,
    convention: ZeroConvention,
) -> Result<ResponseSeries<T>, ResponseError> {
    let (inc, exc) = cross_response_both(grids_i, grids_j, lags)?;
    Ok(match convention {
        ZeroConvention::IncludeZeros => inc,
        ZeroConvention::ExcludeZeros => exc,
    })
}

/// Trade-sign cross-correlator of `eps_i(t+tau)` against `eps_j(t)`, both
/// conventions from one pass.
pub fn sign_cross_correlator_both<T: Scalar>(
    grids_i: &[SecondGrid<T>],
    grids_j: &[SecondGrid<T>],
    lags: &LagSpec,
) -> Result<(ResponseSeries<T>, ResponseSeries<T>), ResponseError> {
    let pairs = paired_days(grids_i, grids_j)?;
    let (i, j) = (&pairs[0].0.symbol, &pairs[0].1.symbol);
    let days = series_days(&pairs);
    let accums = correlator_accums(&pairs, lags);
    let kind = SeriesKind::SignCorrelator;
    let inc = build_series(kind, ZeroConvention::IncludeZeros, i, j, &days, lags, &accums)?;
    let exc = build_series(kind, ZeroConvention::ExcludeZeros, i, j, &days, lags, &accums)?;
    Ok((inc, exc))
}

/// Sign cross-correlator under a single convention.
pub fn sign_cross_correlator<T: Scalar>(
    grids_i: &[SecondGrid<T>],
    grids_j: &[SecondGrid<T>],
    lags: &LagSpec,
    convention: ZeroConvention,
) -> Result<ResponseSeries<T>, ResponseError> {
    let (inc, exc) = sign_cross_correlator_both(grids_i, grids_j, lags)?;
    Ok(match convention {
        ZeroConvention::IncludeZeros => inc,
        ZeroConvention::ExcludeZeros => exc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Symbol;
    use proptest::prelude::*;

    fn sym(s: &str) -> Symbol {
        Symbol::new(s).unwrap()
    }

    fn grid(symbol: &str, day: &str, eps: Vec<i8>, mid: Vec<Option<f64>>) -> SecondGrid<f64> {
        assert_eq!(eps.len(), mid.len());
        let n_trades = eps.iter().map(|&e| u16::from(e != 0)).collect();
        SecondGrid {
            symbol: sym(symbol),
            day: day.parse().unwrap(),
            eps,
            mid,
            n_trades,
        }
    }

    fn lags(ls: &[u32], grid_len: usize) -> LagSpec {
        LagSpec::new(ls.to_vec(), grid_len).unwrap()
    }

    #[test]
    fn lag_spec_validation() {
        assert!(LagSpec::new(vec![], 100).is_err());
        assert!(LagSpec::new(vec![1, 1], 100).is_err());
        assert!(LagSpec::new(vec![5, 3], 100).is_err());
        assert!(LagSpec::new(vec![1, 100], 100).is_err());
        assert!(LagSpec::new(vec![0, 1, 99], 100).is_ok());
        assert_eq!(LagSpec::default_for(22_200).len(), 15);
        assert_eq!(LagSpec::default_for(100).lags(), &[1, 2, 3, 5, 8, 13, 21, 34, 55, 89]);
    }

    #[test]
    fn lag_spec_parse_forms() {
        let csv = LagSpec::parse("1,2,60,300", 22_200).unwrap();
        assert_eq!(csv.lags(), &[1, 2, 60, 300]);
        let log = LagSpec::parse("1:1000:log:30", 22_200).unwrap();
        assert_eq!(log.len(), 30);
        assert_eq!(log.lags()[0], 1);
        assert_eq!(*log.lags().last().unwrap(), 1000);
        assert!(log.lags().windows(2).all(|w| w[0] < w[1]));
        let lin = LagSpec::parse("10:20:lin:11", 22_200).unwrap();
        assert_eq!(lin.lags(), &[10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20]);
        assert!(LagSpec::parse("5:1:log", 22_200).is_err());
        assert!(LagSpec::parse("a,b", 22_200).is_err());
    }

    #[test]
    fn log_return_examples() {
        let g = grid(
            "A",
            "2008-01-02",
            vec![0; 4],
            vec![Some(100.0), Some(100.0), Some(100.0 * std::f64::consts::E), None],
        );
        assert_eq!(log_return(&g, 0, 1), Some(0.0));
        let r = log_return(&g, 0, 2).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert_eq!(log_return(&g, 1, 2), None); // absent endpoint
        assert_eq!(log_return(&g, 3, 1), None); // leaves the grid
    }

    #[test]
    fn log_return_fixture_matches_direct_formula() {
        let mid: Vec<Option<f64>> = (0..20).map(|t| Some(50.0 + (t as f64) * 0.25)).collect();
        let g = grid("A", "2008-01-02", vec![0; 20], mid.clone());
        let (t, tau) = (10usize, 5u32);
        let direct = (mid[t + tau as usize].unwrap() / mid[t].unwrap()).ln();
        assert_eq!(log_return(&g, t, tau), Some(direct));
    }

    #[test]
    fn constant_midpoint_gives_zero_response() {
        let eps = vec![1, -1, 0, 1, 0, -1, 1, 1, 0, -1, 1, 0];
        let mid = vec![Some(100.0); 12];
        let gi = grid("A", "2008-01-02", vec![0; 12], mid.clone());
        let gj = grid("B", "2008-01-02", eps, mid);
        let spec = lags(&[1, 2, 3], 12);
        let (inc, exc) =
            cross_response_both(std::slice::from_ref(&gi), std::slice::from_ref(&gj), &spec)
                .unwrap();
        for p in inc.points.iter().chain(&exc.points) {
            assert_eq!(p.value, 0.0);
            assert_eq!(p.stderr, 0.0);
        }
    }

    /// Exhaustive enumeration oracle for a small single-day pair, written
    /// directly from the definitions, with naive summation.
    fn response_oracle(
        gi: &SecondGrid<f64>,
        gj: &SecondGrid<f64>,
        tau: u32,
        convention: ZeroConvention,
    ) -> Option<(f64, f64, u64)> {
        let len = gi.len();
        let mut products: Vec<f64> = Vec::new();
        let mut n_window = 0u64;
        for t in 0..len.saturating_sub(tau as usize) {
            let (Some(m0), Some(m1)) = (gi.mid[t], gi.mid[t + tau as usize]) else {
                continue;
            };
            n_window += 1;
            let e = gj.eps[t];
            if e != 0 {
                products.push((m1 / m0).ln() * e as f64);
            }
        }
        let n = match convention {
            ZeroConvention::IncludeZeros => n_window,
            ZeroConvention::ExcludeZeros => products.len() as u64,
        };
        if n == 0 {
            return None;
        }
        let sum: f64 = products.iter().sum();
        let sum_sq: f64 = products.iter().map(|p| p * p).sum();
        let nf = n as f64;
        let mean = sum / nf;
        let stderr = if n < 2 {
            0.0
        } else {
            (((sum_sq - sum * sum / nf) / (nf - 1.0)).max(0.0) / nf).sqrt()
        };
        Some((mean, stderr, n))
    }

    fn correlator_oracle(
        gi: &SecondGrid<f64>,
        gj: &SecondGrid<f64>,
        tau: u32,
        convention: ZeroConvention,
    ) -> Option<(f64, u64)> {
        let len = gi.len();
        let mut sum = 0i64;
        let mut n_window = 0u64;
        let mut n_nonzero = 0u64;
        for t in 0..len.saturating_sub(tau as usize) {
            n_window += 1;
            let e = gj.eps[t];
            if e != 0 {
                n_nonzero += 1;
                sum += (gi.eps[t + tau as usize] * e) as i64;
            }
        }
        let n = match convention {
            ZeroConvention::IncludeZeros => n_window,
            ZeroConvention::ExcludeZeros => n_nonzero,
        };
        (n > 0).then(|| (sum as f64 / n as f64, n))
    }

    /// Twelve-second two-stock day, engineered so that every lag's response
    /// numerator has at most two nonzero terms: those sums round once, so
    /// the implementation must match the enumeration bit for bit.
    fn twelve_second_fixture() -> (SecondGrid<f64>, SecondGrid<f64>) {
        // Stock A: midpoint steps 100 -> 101 at second 6.
        let mid_a: Vec<Option<f64>> = (0..12)
            .map(|t| Some(if t < 6 { 100.0 } else { 101.0 }))
            .collect();
        let eps_a = vec![0, 1, 0, -1, 0, 1, -1, 0, 1, 0, -1, 0];
        // Stock B: signs at seconds 2, 5, 7, 9; constant-ish midpoint with
        // a step at second 9.
        let mid_b: Vec<Option<f64>> = (0..12)
            .map(|t| Some(if t < 9 { 50.0 } else { 50.25 }))
            .collect();
        let mut eps_b = vec![0i8; 12];
        eps_b[2] = 1;
        eps_b[5] = -1;
        eps_b[7] = 1;
        eps_b[9] = -1;
        (
            grid("A", "2008-01-02", eps_a, mid_a),
            grid("B", "2008-01-02", eps_b, mid_b),
        )
    }

    #[test]
    fn twelve_second_fixture_matches_oracle_bitwise() {
        let (ga, gb) = twelve_second_fixture();
        let spec = lags(&[1, 2, 3, 4], 12);
        let (inc, exc) =
            cross_response_both(std::slice::from_ref(&ga), std::slice::from_ref(&gb), &spec)
                .unwrap();
        for (series, conv) in [
            (&inc, ZeroConvention::IncludeZeros),
            (&exc, ZeroConvention::ExcludeZeros),
        ] {
            for p in &series.points {
                let (mean, stderr, n) = response_oracle(&ga, &gb, p.tau, conv).unwrap();
                assert_eq!(p.value, mean, "value tau={} conv={conv}", p.tau);
                assert_eq!(p.stderr, stderr, "stderr tau={} conv={conv}", p.tau);
                assert_eq!(p.n_samples, n);
            }
        }

        let (cinc, cexc) =
            sign_cross_correlator_both(std::slice::from_ref(&ga), std::slice::from_ref(&gb), &spec)
                .unwrap();
        for (series, conv) in [
            (&cinc, ZeroConvention::IncludeZeros),
            (&cexc, ZeroConvention::ExcludeZeros),
        ] {
            for p in &series.points {
                let (mean, n) = correlator_oracle(&ga, &gb, p.tau, conv).unwrap();
                assert_eq!(p.value, mean, "theta tau={} conv={conv}", p.tau);
                assert_eq!(p.n_samples, n);
            }
        }
    }

    #[test]
    fn self_correlator_anchor_is_exactly_one() {
        let eps = vec![1, 0, -1, 1, 0, 0, -1, 1, 1, 0, -1, 1];
        let mid = vec![Some(10.0); 12];
        let g = grid("A", "2008-01-02", eps, mid);
        let spec = LagSpec::new(vec![0, 1], 12).unwrap();
        let theta = sign_cross_correlator(
            std::slice::from_ref(&g),
            std::slice::from_ref(&g),
            &spec,
            ZeroConvention::ExcludeZeros,
        )
        .unwrap();
        assert_eq!(theta.get(0).unwrap().value, 1.0);
    }

    #[test]
    fn opposed_constant_signs_give_minus_one() {
        let gi = grid("A", "2008-01-02", vec![1; 12], vec![Some(10.0); 12]);
        let gj = grid("B", "2008-01-02", vec![-1; 12], vec![Some(10.0); 12]);
        let spec = lags(&[1, 2, 3], 12);
        for conv in [ZeroConvention::IncludeZeros, ZeroConvention::ExcludeZeros] {
            let theta = sign_cross_correlator(
                std::slice::from_ref(&gi),
                std::slice::from_ref(&gj),
                &spec,
                conv,
            )
            .unwrap();
            for p in &theta.points {
                assert_eq!(p.value, -1.0);
            }
        }
    }

    #[test]
    fn mismatched_day_sets_rejected() {
        let ga = grid("A", "2008-01-02", vec![0; 4], vec![Some(1.0); 4]);
        let gb = grid("B", "2008-01-03", vec![0; 4], vec![Some(1.0); 4]);
        let spec = lags(&[1], 4);
        assert!(matches!(
            cross_response_both(std::slice::from_ref(&ga), std::slice::from_ref(&gb), &spec),
            Err(ResponseError::MismatchedDays { .. })
        ));
    }

    #[test]
    fn lags_without_samples_are_omitted() {
        // Midpoint only defined for the first 3 seconds: lag 5 has no window.
        let mid: Vec<Option<f64>> = (0..8).map(|t| (t < 3).then_some(10.0)).collect();
        let ga = grid("A", "2008-01-02", vec![0; 8], mid);
        let gb = grid("B", "2008-01-02", vec![1; 8], vec![Some(1.0); 8]);
        let spec = lags(&[1, 2, 5], 8);
        let (inc, _) =
            cross_response_both(std::slice::from_ref(&ga), std::slice::from_ref(&gb), &spec)
                .unwrap();
        assert!(inc.get(1).is_some());
        assert!(inc.get(2).is_some());
        assert!(inc.get(5).is_none());
    }

    fn random_grid_pair(
        seed: u64,
        days: usize,
        len: usize,
    ) -> (Vec<SecondGrid<f64>>, Vec<SecondGrid<f64>>) {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(seed);
        let mut gis = Vec::new();
        let mut gjs = Vec::new();
        for d in 0..days {
            let day = format!("2008-02-{:02}", d + 1);
            let mut mid_val = 100.0f64;
            let mid: Vec<Option<f64>> = (0..len)
                .map(|_| {
                    mid_val *= 1.0 + rng.random_range(-0.001..0.001);
                    (rng.random::<f64>() > 0.05).then_some(mid_val)
                })
                .collect();
            let eps_i: Vec<i8> = (0..len).map(|_| rng.random_range(-1i8..=1)).collect();
            let eps_j: Vec<i8> = (0..len).map(|_| rng.random_range(-1i8..=1)).collect();
            gis.push(grid("A", &day, eps_i, mid.clone()));
            gjs.push(grid("B", &day, eps_j, mid));
        }
        (gis, gjs)
    }

    #[test]
    fn multi_day_matches_oracle_and_day_partials() {
        let (gis, gjs) = random_grid_pair(7, 3, 160);
        let spec = lags(&[1, 3, 9], 160);
        let (inc, exc) = cross_response_both(&gis, &gjs, &spec).unwrap();

        // Pooled sums reconstruct from single-day runs: day hygiene.
        for p in &inc.points {
            let mut weighted = 0.0f64;
            let mut n_total = 0u64;
            for d in 0..gis.len() {
                if let Some((mean, _, n)) = response_oracle(&gis[d], &gjs[d], p.tau, ZeroConvention::IncludeZeros) {
                    weighted += mean * n as f64;
                    n_total += n;
                }
            }
            assert_eq!(p.n_samples, n_total);
            let pooled = weighted / n_total as f64;
            assert!(
                (p.value - pooled).abs() <= 1e-12 * pooled.abs().max(1e-9),
                "tau={} impl={} oracle={}",
                p.tau,
                p.value,
                pooled
            );
        }
        // Perturbing day 3 cannot change the day-1+2 partial: recompute
        // with a modified last day and check the first-days contribution.
        let mut gjs_mut = gjs.clone();
        for e in gjs_mut[2].eps.iter_mut() {
            *e = -*e;
        }
        let (inc_mut, _) = cross_response_both(&gis, &gjs_mut, &spec).unwrap();
        for (p, q) in inc.points.iter().zip(&inc_mut.points) {
            // day-1+2 contributions from the oracle are identical in both
            let contrib = |gjs: &[SecondGrid<f64>]| -> f64 {
                (0..2)
                    .filter_map(|d| {
                        response_oracle(&gis[d], &gjs[d], p.tau, ZeroConvention::IncludeZeros)
                            .map(|(m, _, n)| m * n as f64)
                    })
                    .sum()
            };
            assert_eq!(contrib(&gjs), contrib(&gjs_mut));
            // and the pooled means differ only through day 3
            assert_eq!(p.n_samples, q.n_samples);
        }
        let _ = exc;
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        /// Windowed zero-sign scaling: R_inc == f_win * R_exc to 1e-12
        /// relative, with f_win = n_exc / n_inc over identical windows.
        #[test]
        fn zero_sign_scaling_identity(seed in 0u64..500) {
            let (gis, gjs) = random_grid_pair(seed, 2, 120);
            let spec = lags(&[1, 2, 7, 19], 120);
            let (inc, exc) = cross_response_both(&gis, &gjs, &spec).unwrap();
            for p_inc in &inc.points {
                let p_exc = exc.get(p_inc.tau).unwrap();
                let f_win = p_exc.n_samples as f64 / p_inc.n_samples as f64;
                let lhs = p_inc.value;
                let rhs = f_win * p_exc.value;
                let denom = lhs.abs().max(1e-15);
                prop_assert!(
                    ((lhs - rhs).abs() / denom) < 1e-12,
                    "tau={} inc={} f*exc={}", p_inc.tau, lhs, rhs
                );
                prop_assert!(p_inc.n_samples >= p_exc.n_samples);
            }
        }

        /// |Theta| <= 1 for every pair, lag, and convention.
        #[test]
        fn correlator_bounded(seed in 0u64..500) {
            let (gis, gjs) = random_grid_pair(seed, 2, 100);
            let spec = LagSpec::new(vec![0, 1, 2, 11], 100).unwrap();
            let (inc, exc) = sign_cross_correlator_both(&gis, &gjs, &spec).unwrap();
            for p in inc.points.iter().chain(&exc.points) {
                prop_assert!(p.value.abs() <= 1.0 + 1e-15);
            }
        }

        /// Self-kernel equivalence and exact sign flip under negation.
        #[test]
        fn self_kernel_and_sign_linearity(seed in 0u64..200) {
            let (gis, gjs) = random_grid_pair(seed, 1, 90);
            let spec = lags(&[1, 4], 90);
            // self response: identical slices
            let (self_inc, _) = cross_response_both(&gis, &gis, &spec).unwrap();
            prop_assert_eq!(self_inc.kind, SeriesKind::SelfResponse);
            // negation flips R exactly
            let mut neg = gjs.clone();
            for g in &mut neg {
                for e in g.eps.iter_mut() {
                    *e = -*e;
                }
            }
            let (inc, _) = cross_response_both(&gis, &gjs, &spec).unwrap();
            let (ninc, _) = cross_response_both(&gis, &neg, &spec).unwrap();
            for (p, q) in inc.points.iter().zip(&ninc.points) {
                prop_assert_eq!(p.value, -q.value);
                prop_assert_eq!(p.n_samples, q.n_samples);
            }
        }
    }
}
