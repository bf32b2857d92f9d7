//! Averages over stock pairs: passive/active responses and correlators,
//! sector-restricted averages, normalized response matrices, rankings, and
//! the trade-count correlation diagnostic.
//!
//! The pairwise response is not symmetric in its indices, so two distinct
//! averages exist for every anchor stock: the *passive* average pools
//! `R_ij` over impacting partners `j` (how the anchor is moved by the
//! market) and the *active* average pools over impacted partners `i` (how
//! the anchor moves the market). Self-pairs are always excluded.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::SectorMap;
use crate::numeric::{mean_and_stderr, KahanSum};
use crate::response::{ResponseSeries, SeriesKind, ZeroConvention};
use crate::scalar::{cast, Scalar};
use crate::signs::ActivityStats;
use crate::types::{InvalidValue, Symbol};

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("missing pairwise series for {0:?}")]
    MissingPairSeries(Vec<(Symbol, Symbol)>),
    #[error("missing average input for {symbol} at tau={tau}")]
    MissingSeries { symbol: Symbol, tau: u32 },
    #[error("sector {0:?} has no members other than the anchor")]
    EmptySector(String),
    #[error("all off-diagonal responses are zero at this lag")]
    DegenerateMax,
    #[error("degenerate variance: {0} is constant across symbols")]
    DegenerateVariance(&'static str),
    #[error("need at least {needed} symbols, got {got}")]
    TooFewSymbols { needed: usize, got: usize },
    #[error(transparent)]
    Invalid(#[from] InvalidValue),
}

/// Which side of the pair the anchor sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Anchor is the impacted stock `i`; average over impacting `j`.
    Passive,
    /// Anchor is the impacting stock `j`; average over impacted `i`.
    Active,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Passive => "passive",
            Direction::Active => "active",
        })
    }
}

impl FromStr for Direction {
    type Err = InvalidValue;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "passive" | "p" => Ok(Direction::Passive),
            "active" | "a" => Ok(Direction::Active),
            other => Err(InvalidValue(format!("unknown direction {other:?}"))),
        }
    }
}

/// Key of one stored pairwise series.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SeriesKey {
    pub kind: SeriesKind,
    pub convention: ZeroConvention,
    pub i: Symbol,
    pub j: Symbol,
}

/// In-memory store of pairwise series, keyed and iterated in a fixed order.
#[derive(Debug, Clone, Default)]
pub struct SeriesStore<T: Scalar> {
    map: BTreeMap<SeriesKey, ResponseSeries<T>>,
}

impl<T: Scalar> SeriesStore<T> {
    pub fn new() -> Self {
        Self { map: BTreeMap::new() }
    }

    pub fn insert(&mut self, series: ResponseSeries<T>) {
        let key = SeriesKey {
            kind: series.kind,
            convention: series.convention,
            i: series.i.clone(),
            j: series.j.clone(),
        };
        self.map.insert(key, series);
    }

    pub fn get(
        &self,
        kind: SeriesKind,
        convention: ZeroConvention,
        i: &Symbol,
        j: &Symbol,
    ) -> Option<&ResponseSeries<T>> {
        self.map.get(&SeriesKey {
            kind,
            convention,
            i: i.clone(),
            j: j.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SeriesKey, &ResponseSeries<T>)> {
        self.map.iter()
    }

    /// Symbols appearing on either side of any stored series.
    pub fn symbols(&self) -> BTreeSet<Symbol> {
        self.map
            .keys()
            .flat_map(|k| [k.i.clone(), k.j.clone()])
            .collect()
    }
}

/// One point of an averaged series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvgPoint<T: Scalar> {
    pub tau: u32,
    pub value: T,
    pub stderr: T,
    pub n_pairs: u64,
}

/// Average of pairwise series over an anchor's partners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize",
    deserialize = "T: serde::de::DeserializeOwned"
))]
pub struct AverageSeries<T: Scalar> {
    pub direction: Direction,
    pub anchor: Symbol,
    pub kind: SeriesKind,
    pub convention: ZeroConvention,
    /// Partners actually averaged (anchor never appears here).
    pub universe: BTreeSet<Symbol>,
    pub points: Vec<AvgPoint<T>>,
}

impl<T: Scalar> AverageSeries<T> {
    pub fn get(&self, tau: u32) -> Option<&AvgPoint<T>> {
        self.points
            .binary_search_by_key(&tau, |p| p.tau)
            .ok()
            .map(|idx| &self.points[idx])
    }

    pub fn write_csv<W: Write>(&self, mut w: W, provenance: Option<&str>) -> std::io::Result<()> {
        if let Some(p) = provenance {
            writeln!(w, "# {p}")?;
        }
        writeln!(w, "tau,value,stderr,n_pairs")?;
        for p in &self.points {
            writeln!(w, "{},{},{},{}", p.tau, p.value, p.stderr, p.n_pairs)?;
        }
        Ok(())
    }
}

/// Unweighted mean of pairwise series over the anchor's partners.
///
/// The anchor is removed from the partner set; every remaining pairwise
/// series must exist in the store. At each lag, partners whose series
/// carry that lag contribute; `stderr` is the cross-partner standard
/// deviation over `sqrt(n_pairs)`.
pub fn average<T: Scalar>(
    direction: Direction,
    anchor: &Symbol,
    partners: &BTreeSet<Symbol>,
    kind: SeriesKind,
    convention: ZeroConvention,
    store: &SeriesStore<T>,
) -> Result<AverageSeries<T>, AggregateError> {
    let partners: Vec<&Symbol> = partners.iter().filter(|p| *p != anchor).collect();
    let mut missing = Vec::new();
    let mut series = Vec::with_capacity(partners.len());
    for partner in &partners {
        let (i, j) = match direction {
            Direction::Passive => (anchor, *partner),
            Direction::Active => (*partner, anchor),
        };
        match store.get(kind, convention, i, j) {
            Some(s) => series.push(s),
            None => missing.push((i.clone(), j.clone())),
        }
    }
    if !missing.is_empty() {
        return Err(AggregateError::MissingPairSeries(missing));
    }

    // Union of lags over all partner series, ascending.
    let mut taus: BTreeSet<u32> = BTreeSet::new();
    for s in &series {
        taus.extend(s.points.iter().map(|p| p.tau));
    }
    let mut points = Vec::with_capacity(taus.len());
    for tau in taus {
        let mut sum = KahanSum::<T>::new();
        let mut sum_sq = KahanSum::<T>::new();
        let mut n = 0u64;
        for s in &series {
            if let Some(p) = s.get(tau) {
                sum.add(p.value);
                sum_sq.add(p.value * p.value);
                n += 1;
            }
        }
        if n > 0 {
            let (value, stderr) = mean_and_stderr(sum.value(), sum_sq.value(), n);
            points.push(AvgPoint { tau, value, stderr, n_pairs: n });
        }
    }
    Ok(AverageSeries {
        direction,
        anchor: anchor.clone(),
        kind,
        convention,
        universe: partners.into_iter().cloned().collect(),
        points,
    })
}

/// Passive average: how the anchor's price responds to its partners.
pub fn passive_average<T: Scalar>(
    anchor: &Symbol,
    partners: &BTreeSet<Symbol>,
    convention: ZeroConvention,
    store: &SeriesStore<T>,
) -> Result<AverageSeries<T>, AggregateError> {
    average(
        Direction::Passive,
        anchor,
        partners,
        SeriesKind::CrossResponse,
        convention,
        store,
    )
}

/// Active average: how the anchor's trades move its partners.
pub fn active_average<T: Scalar>(
    anchor: &Symbol,
    partners: &BTreeSet<Symbol>,
    convention: ZeroConvention,
    store: &SeriesStore<T>,
) -> Result<AverageSeries<T>, AggregateError> {
    average(
        Direction::Active,
        anchor,
        partners,
        SeriesKind::CrossResponse,
        convention,
        store,
    )
}

/// Passive/active average of sign correlators.
pub fn correlator_average<T: Scalar>(
    direction: Direction,
    anchor: &Symbol,
    partners: &BTreeSet<Symbol>,
    convention: ZeroConvention,
    store: &SeriesStore<T>,
) -> Result<AverageSeries<T>, AggregateError> {
    average(
        direction,
        anchor,
        partners,
        SeriesKind::SignCorrelator,
        convention,
        store,
    )
}

/// Average restricted to one sector's members, anchor excluded.
pub fn sector_average<T: Scalar>(
    anchor: &Symbol,
    direction: Direction,
    sector: &str,
    sector_map: &SectorMap,
    kind: SeriesKind,
    convention: ZeroConvention,
    store: &SeriesStore<T>,
) -> Result<AverageSeries<T>, AggregateError> {
    let members: BTreeSet<Symbol> = sector_map
        .members(sector)
        .into_iter()
        .filter(|m| m != anchor)
        .collect();
    if members.is_empty() {
        return Err(AggregateError::EmptySector(sector.to_owned()));
    }
    average(direction, anchor, &members, kind, convention, store)
}

/// Contiguous block of symbols belonging to one sector in a matrix layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorSpan {
    pub sector: String,
    pub start: usize,
    pub len: usize,
}

/// Orders symbols by (sector, symbol) and reports the sector boundaries.
/// Symbols without a sector entry sort into a leading "?" block.
pub fn order_by_sector(symbols: &[Symbol], map: &SectorMap) -> (Vec<Symbol>, Vec<SectorSpan>) {
    let mut keyed: Vec<(String, Symbol)> = symbols
        .iter()
        .map(|s| {
            let sector = map.sector_of(s).unwrap_or("?").to_owned();
            (sector, s.clone())
        })
        .collect();
    keyed.sort();
    let mut spans: Vec<SectorSpan> = Vec::new();
    let mut ordered = Vec::with_capacity(keyed.len());
    for (idx, (sector, symbol)) in keyed.into_iter().enumerate() {
        match spans.last_mut() {
            Some(span) if span.sector == sector => span.len += 1,
            _ => spans.push(SectorSpan { sector, start: idx, len: 1 }),
        }
        ordered.push(symbol);
    }
    (ordered, spans)
}

/// Normalized pairwise response matrix at a fixed lag.
///
/// Rows index the impacted stock `i`, columns the impacting stock `j`.
/// Off-diagonal entries are divided by the maximum absolute off-diagonal
/// response, so the strongest pair sits at ±1. Self-responses stay out of
/// the normalization; where available they are reported in `diagonal`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize",
    deserialize = "T: serde::de::DeserializeOwned"
))]
pub struct ResponseMatrix<T: Scalar> {
    pub tau: u32,
    pub convention: ZeroConvention,
    pub symbols: Vec<Symbol>,
    /// Row-major normalized entries; the diagonal is fixed at zero.
    pub rho: Vec<T>,
    /// Normalizing scalar: max |R_ij| over off-diagonal pairs.
    pub max_abs: T,
    /// Raw self-responses at this lag, where a self series exists.
    pub diagonal: Vec<Option<T>>,
    pub sector_spans: Vec<SectorSpan>,
}

impl<T: Scalar> ResponseMatrix<T> {
    pub fn n(&self) -> usize {
        self.symbols.len()
    }

    pub fn rho(&self, row: usize, col: usize) -> T {
        self.rho[row * self.n() + col]
    }

    /// CSV with a symbol header row and leading symbol column.
    pub fn write_csv<W: Write>(&self, mut w: W, provenance: Option<&str>) -> std::io::Result<()> {
        if let Some(p) = provenance {
            writeln!(w, "# {p}")?;
        }
        write!(w, "symbol")?;
        for s in &self.symbols {
            write!(w, ",{s}")?;
        }
        writeln!(w)?;
        for (row, s) in self.symbols.iter().enumerate() {
            write!(w, "{s}")?;
            for col in 0..self.n() {
                write!(w, ",{}", self.rho(row, col))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Builds the normalized response matrix over `symbols` at lag `tau`.
pub fn response_matrix<T: Scalar>(
    symbols: &[Symbol],
    sector_spans: Vec<SectorSpan>,
    tau: u32,
    convention: ZeroConvention,
    store: &SeriesStore<T>,
) -> Result<ResponseMatrix<T>, AggregateError> {
    let n = symbols.len();
    if n < 2 {
        return Err(AggregateError::TooFewSymbols { needed: 2, got: n });
    }
    let mut raw = vec![T::zero(); n * n];
    let mut missing = Vec::new();
    for (row, i) in symbols.iter().enumerate() {
        for (col, j) in symbols.iter().enumerate() {
            if row == col {
                continue;
            }
            match store
                .get(SeriesKind::CrossResponse, convention, i, j)
                .and_then(|s| s.get(tau))
            {
                Some(p) => raw[row * n + col] = p.value,
                None => missing.push((i.clone(), j.clone())),
            }
        }
    }
    if !missing.is_empty() {
        return Err(AggregateError::MissingPairSeries(missing));
    }

    let mut max_abs = T::zero();
    for (idx, v) in raw.iter().enumerate() {
        if idx / n != idx % n {
            max_abs = max_abs.max(v.abs());
        }
    }
    if max_abs == T::zero() {
        return Err(AggregateError::DegenerateMax);
    }
    let rho: Vec<T> = raw
        .iter()
        .enumerate()
        .map(|(idx, &v)| if idx / n == idx % n { T::zero() } else { v / max_abs })
        .collect();

    let diagonal: Vec<Option<T>> = symbols
        .iter()
        .map(|s| {
            store
                .get(SeriesKind::SelfResponse, convention, s, s)
                .and_then(|series| series.get(tau))
                .map(|p| p.value)
        })
        .collect();

    Ok(ResponseMatrix {
        tau,
        convention,
        symbols: symbols.to_vec(),
        rho,
        max_abs,
        diagonal,
        sector_spans,
    })
}

/// One ranked stock with its normalized average response value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry<T: Scalar> {
    pub symbol: Symbol,
    pub value: T,
}

/// Top-k stocks by average response strength at a fixed lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize",
    deserialize = "T: serde::de::DeserializeOwned"
))]
pub struct Ranking<T: Scalar> {
    pub direction: Direction,
    pub tau: u32,
    pub convention: ZeroConvention,
    /// Ranked by |value| instead of signed value.
    pub by_abs: bool,
    pub entries: Vec<RankEntry<T>>,
}

impl<T: Scalar> Ranking<T> {
    /// CSV rows `rank,symbol,value,sector`; sector column is empty without
    /// a map.
    pub fn write_csv<W: Write>(
        &self,
        mut w: W,
        sector_map: Option<&SectorMap>,
        provenance: Option<&str>,
    ) -> std::io::Result<()> {
        if let Some(p) = provenance {
            writeln!(w, "# {p}")?;
        }
        writeln!(w, "rank,symbol,value,sector")?;
        for (idx, e) in self.entries.iter().enumerate() {
            let sector = sector_map
                .and_then(|m| m.sector_of(&e.symbol))
                .unwrap_or("");
            writeln!(w, "{},{},{},{}", idx + 1, e.symbol, e.value, sector)?;
        }
        Ok(())
    }
}

/// Ranks `symbols` by their passive or active average response at `tau`,
/// normalized by the maximum absolute average so ranks are scale-free.
///
/// Descending by value (or |value| with `by_abs`), ties broken by symbol
/// order. Every symbol must have an average value at `tau`.
pub fn rank_stocks<T: Scalar>(
    direction: Direction,
    tau: u32,
    convention: ZeroConvention,
    k: usize,
    symbols: &BTreeSet<Symbol>,
    store: &SeriesStore<T>,
    by_abs: bool,
) -> Result<Ranking<T>, AggregateError> {
    let mut values: Vec<(Symbol, T)> = Vec::with_capacity(symbols.len());
    for anchor in symbols {
        let avg = average(
            direction,
            anchor,
            symbols,
            SeriesKind::CrossResponse,
            convention,
            store,
        )?;
        let point = avg
            .get(tau)
            .ok_or_else(|| AggregateError::MissingSeries { symbol: anchor.clone(), tau })?;
        values.push((anchor.clone(), point.value));
    }
    let max_abs = values
        .iter()
        .map(|(_, v)| v.abs())
        .fold(T::zero(), T::max);
    if max_abs > T::zero() {
        for (_, v) in values.iter_mut() {
            *v /= max_abs;
        }
    }
    values.sort_by(|(sa, va), (sb, vb)| {
        let (ka, kb) = if by_abs {
            (va.abs(), vb.abs())
        } else {
            (*va, *vb)
        };
        kb.partial_cmp(&ka)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| sa.cmp(sb))
    });
    values.truncate(k);
    Ok(Ranking {
        direction,
        tau,
        convention,
        by_abs,
        entries: values
            .into_iter()
            .map(|(symbol, value)| RankEntry { symbol, value })
            .collect(),
    })
}

/// Pearson correlation between the active average response at a fixed lag
/// and the average daily trade count, across symbols.
pub fn trade_count_correlation<T: Scalar>(
    active_values: &BTreeMap<Symbol, T>,
    stats: &BTreeMap<Symbol, ActivityStats<T>>,
) -> Result<T, AggregateError> {
    let joined: Vec<(T, T)> = active_values
        .iter()
        .filter_map(|(sym, &resp)| stats.get(sym).map(|st| (resp, st.avg_daily_trades)))
        .collect();
    if joined.len() < 3 {
        return Err(AggregateError::TooFewSymbols { needed: 3, got: joined.len() });
    }
    pearson(&joined)
}

/// Textbook Pearson coefficient with compensated sums.
pub fn pearson<T: Scalar>(points: &[(T, T)]) -> Result<T, AggregateError> {
    let n = cast::<T>(points.len() as f64);
    let mut sx = KahanSum::new();
    let mut sy = KahanSum::new();
    for &(x, y) in points {
        sx.add(x);
        sy.add(y);
    }
    let mx = sx.value() / n;
    let my = sy.value() / n;
    let mut sxx = KahanSum::new();
    let mut syy = KahanSum::new();
    let mut sxy = KahanSum::new();
    for &(x, y) in points {
        let (dx, dy) = (x - mx, y - my);
        sxx.add(dx * dx);
        syy.add(dy * dy);
        sxy.add(dx * dy);
    }
    if sxx.value() == T::zero() {
        return Err(AggregateError::DegenerateVariance("response"));
    }
    if syy.value() == T::zero() {
        return Err(AggregateError::DegenerateVariance("trade count"));
    }
    Ok(sxy.value() / (sxx.value() * syy.value()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::response::SeriesPoint;
    use crate::types::Day;
    use proptest::prelude::*;

    type PairSpec<'a> = (&'a str, &'a str, Vec<(u32, f64)>);

    fn sym(s: &str) -> Symbol {
        Symbol::new(s).unwrap()
    }

    fn series(
        kind: SeriesKind,
        conv: ZeroConvention,
        i: &str,
        j: &str,
        points: &[(u32, f64)],
    ) -> ResponseSeries<f64> {
        ResponseSeries {
            kind,
            convention: conv,
            i: sym(i),
            j: sym(j),
            days: vec![Day::new(2008, 1, 2).unwrap()],
            points: points
                .iter()
                .map(|&(tau, value)| SeriesPoint { tau, value, stderr: 0.0, n_samples: 100 })
                .collect(),
        }
    }

    fn store_with(pairs: &[PairSpec]) -> SeriesStore<f64> {
        let mut store = SeriesStore::new();
        for (i, j, pts) in pairs {
            store.insert(series(
                SeriesKind::CrossResponse,
                ZeroConvention::IncludeZeros,
                i,
                j,
                pts,
            ));
        }
        store
    }

    const INC: ZeroConvention = ZeroConvention::IncludeZeros;

    #[test]
    fn single_partner_average_equals_pair_series() {
        let store = store_with(&[("A", "B", vec![(1, 0.5), (2, 0.25)])]);
        let partners = BTreeSet::from([sym("B")]);
        let avg = passive_average(&sym("A"), &partners, INC, &store).unwrap();
        assert_eq!(avg.get(1).unwrap().value, 0.5);
        assert_eq!(avg.get(2).unwrap().value, 0.25);
        assert_eq!(avg.get(1).unwrap().n_pairs, 1);
        assert_eq!(avg.get(1).unwrap().stderr, 0.0);
        assert!(!avg.universe.contains(&sym("A")));
    }

    #[test]
    fn symmetric_partners_cancel() {
        let store = store_with(&[
            ("A", "B", vec![(1, 0.5)]),
            ("A", "C", vec![(1, -0.5)]),
        ]);
        let partners = BTreeSet::from([sym("B"), sym("C")]);
        let avg = passive_average(&sym("A"), &partners, INC, &store).unwrap();
        assert_eq!(avg.get(1).unwrap().value, 0.0);
        assert_eq!(avg.get(1).unwrap().n_pairs, 2);
    }

    #[test]
    fn five_partner_fixture_matches_summation_oracle() {
        let values = [0.4, -0.1, 0.3, 0.2, -0.25];
        let pairs: Vec<PairSpec> = vec![
            ("A", "B", vec![(7, values[0])]),
            ("A", "C", vec![(7, values[1])]),
            ("A", "D", vec![(7, values[2])]),
            ("A", "E", vec![(7, values[3])]),
            ("A", "F", vec![(7, values[4])]),
        ];
        let store = store_with(&pairs);
        let partners: BTreeSet<Symbol> =
            ["B", "C", "D", "E", "F"].iter().map(|s| sym(s)).collect();
        let avg = passive_average(&sym("A"), &partners, INC, &store).unwrap();

        let mean: f64 = values.iter().sum::<f64>() / values.len() as f64;
        let var: f64 =
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
        let stderr = (var / values.len() as f64).sqrt();
        let p = avg.get(7).unwrap();
        assert!((p.value - mean).abs() < 1e-15);
        assert!((p.stderr - stderr).abs() < 1e-15);
        assert_eq!(p.n_pairs, 5);
    }

    #[test]
    fn active_average_mirrors_roles() {
        let mut store = SeriesStore::new();
        store.insert(series(SeriesKind::CrossResponse, INC, "B", "A", &[(1, 0.3)]));
        store.insert(series(SeriesKind::CrossResponse, INC, "C", "A", &[(1, 0.5)]));
        let partners = BTreeSet::from([sym("B"), sym("C")]);
        let avg = active_average(&sym("A"), &partners, INC, &store).unwrap();
        assert!((avg.get(1).unwrap().value - 0.4).abs() < 1e-15);
        assert_eq!(avg.direction, Direction::Active);
    }

    #[test]
    fn missing_pair_is_reported_with_names() {
        let store = store_with(&[("A", "B", vec![(1, 0.5)])]);
        let partners = BTreeSet::from([sym("B"), sym("C")]);
        let err = passive_average(&sym("A"), &partners, INC, &store).unwrap_err();
        match err {
            AggregateError::MissingPairSeries(pairs) => {
                assert_eq!(pairs, vec![(sym("A"), sym("C"))]);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn sector_average_cases() {
        let mut map = SectorMap::default();
        map.insert(sym("A"), "X");
        map.insert(sym("B"), "X");
        map.insert(sym("C"), "Y");
        let store = store_with(&[("A", "B", vec![(1, 0.5)])]);

        // Sector containing only the anchor is empty after exclusion.
        let mut solo = SectorMap::default();
        solo.insert(sym("A"), "X");
        let err = sector_average(
            &sym("A"),
            Direction::Passive,
            "X",
            &solo,
            SeriesKind::CrossResponse,
            INC,
            &store,
        )
        .unwrap_err();
        assert!(matches!(err, AggregateError::EmptySector(_)));

        // Sector of one other symbol equals the pairwise series.
        let avg = sector_average(
            &sym("A"),
            Direction::Passive,
            "X",
            &map,
            SeriesKind::CrossResponse,
            INC,
            &store,
        )
        .unwrap();
        assert_eq!(avg.get(1).unwrap().value, 0.5);
    }

    #[test]
    fn three_sector_fixture_matches_oracle() {
        let mut map = SectorMap::default();
        for (s, sec) in [
            ("B", "S1"),
            ("C", "S1"),
            ("D", "S2"),
            ("E", "S2"),
            ("F", "S3"),
        ] {
            map.insert(sym(s), sec);
        }
        let vals = [("B", 0.1), ("C", 0.2), ("D", -0.1), ("E", 0.3), ("F", 0.7)];
        let pairs: Vec<PairSpec> =
            vals.iter().map(|&(p, v)| ("A", p, vec![(1u32, v)])).collect();
        let store = store_with(&pairs);
        for sector in ["S1", "S2", "S3"] {
            let avg = sector_average(
                &sym("A"),
                Direction::Passive,
                sector,
                &map,
                SeriesKind::CrossResponse,
                INC,
                &store,
            )
            .unwrap();
            let mean = avg.get(1).unwrap().value;
            let vs: Vec<f64> = vals
                .iter()
                .filter(|(p, _)| map.sector_of(&sym(p)) == Some(sector))
                .map(|&(_, v)| v)
                .collect();
            let oracle: f64 = vs.iter().sum::<f64>() / vs.len() as f64;
            assert!((mean - oracle).abs() < 1e-15, "sector {sector}");
        }
    }

    fn full_store(n: usize, f: impl Fn(usize, usize) -> f64) -> (SeriesStore<f64>, Vec<Symbol>) {
        let symbols: Vec<Symbol> = (0..n).map(|i| sym(&format!("S{i:02}"))).collect();
        let mut store = SeriesStore::new();
        for (a, sa) in symbols.iter().enumerate() {
            for (b, sb) in symbols.iter().enumerate() {
                if a != b {
                    store.insert(series(
                        SeriesKind::CrossResponse,
                        INC,
                        sa.as_str(),
                        sb.as_str(),
                        &[(60, f(a, b))],
                    ));
                }
            }
        }
        (store, symbols)
    }

    #[test]
    fn matrix_normalizes_by_max_abs_offdiagonal() {
        let (store, symbols) = full_store(2, |a, _| if a == 0 { 0.5 } else { -1.0 });
        let m = response_matrix(&symbols, vec![], 60, INC, &store).unwrap();
        assert_eq!(m.max_abs, 1.0);
        assert_eq!(m.rho(0, 1), 0.5);
        assert_eq!(m.rho(1, 0), -1.0);
        assert_eq!(m.rho(0, 0), 0.0);
    }

    #[test]
    fn matrix_constant_entries_all_one() {
        let (store, symbols) = full_store(3, |_, _| 0.25);
        let m = response_matrix(&symbols, vec![], 60, INC, &store).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                if r != c {
                    assert_eq!(m.rho(r, c), 1.0);
                }
            }
        }
    }

    #[test]
    fn matrix_four_symbol_fixture_matches_oracle() {
        let raw = |a: usize, b: usize| ((a * 7 + b * 3) as f64 - 9.0) / 20.0;
        let (store, symbols) = full_store(4, raw);
        let m = response_matrix(&symbols, vec![], 60, INC, &store).unwrap();
        // Oracle: direct max and division.
        let mut max_abs = 0.0f64;
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    max_abs = max_abs.max(raw(a, b).abs());
                }
            }
        }
        assert_eq!(m.max_abs, max_abs);
        let mut attained = false;
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    assert_eq!(m.rho(a, b), raw(a, b) / max_abs);
                    if m.rho(a, b).abs() == 1.0 {
                        attained = true;
                    }
                }
            }
        }
        assert!(attained, "normalization must attain |rho| = 1");
    }

    #[test]
    fn matrix_degenerate_when_all_zero() {
        let (store, symbols) = full_store(3, |_, _| 0.0);
        assert!(matches!(
            response_matrix(&symbols, vec![], 60, INC, &store),
            Err(AggregateError::DegenerateMax)
        ));
    }

    #[test]
    fn matrix_permutation_conjugates_rows_and_columns() {
        let raw = |a: usize, b: usize| (a as f64 - b as f64) * 0.1 + 0.05;
        let (store, symbols) = full_store(4, raw);
        let m = response_matrix(&symbols, vec![], 60, INC, &store).unwrap();
        let perm = [2usize, 0, 3, 1];
        let permuted: Vec<Symbol> = perm.iter().map(|&p| symbols[p].clone()).collect();
        let mp = response_matrix(&permuted, vec![], 60, INC, &store).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(mp.rho(r, c), m.rho(perm[r], perm[c]));
            }
        }
    }

    #[test]
    fn rank_basics_and_ties() {
        let (store, symbols) = full_store(2, |a, _| if a == 0 { 0.2 } else { 0.5 });
        let set: BTreeSet<Symbol> = symbols.iter().cloned().collect();
        // passive average of S00 is R(S00, S01) = 0.2; of S01 is 0.5.
        let r = rank_stocks(Direction::Passive, 60, INC, 1, &set, &store, false).unwrap();
        assert_eq!(r.entries.len(), 1);
        assert_eq!(r.entries[0].symbol, sym("S01"));
        assert_eq!(r.entries[0].value, 1.0); // normalized by the max

        // All equal: lexicographic order.
        let (store, symbols) = full_store(3, |_, _| 0.3);
        let set: BTreeSet<Symbol> = symbols.iter().cloned().collect();
        let r = rank_stocks(Direction::Active, 60, INC, 3, &set, &store, false).unwrap();
        let names: Vec<&str> = r.entries.iter().map(|e| e.symbol.as_str()).collect();
        assert_eq!(names, vec!["S00", "S01", "S02"]);
    }

    #[test]
    fn rank_ten_symbol_fixture_matches_sort_oracle() {
        let raw = |a: usize, b: usize| ((a as f64 * 1.7 - b as f64) * 0.01).sin() * 0.1;
        let (store, symbols) = full_store(10, raw);
        let set: BTreeSet<Symbol> = symbols.iter().cloned().collect();
        for direction in [Direction::Passive, Direction::Active] {
            let r = rank_stocks(direction, 60, INC, 10, &set, &store, false).unwrap();
            // Oracle: explicit averages, normalized and sorted.
            let mut oracle: Vec<(String, f64)> = symbols
                .iter()
                .enumerate()
                .map(|(a, s)| {
                    let vals: Vec<f64> = (0..10)
                        .filter(|&b| b != a)
                        .map(|b| match direction {
                            Direction::Passive => raw(a, b),
                            Direction::Active => raw(b, a),
                        })
                        .collect();
                    (s.as_str().to_owned(), vals.iter().sum::<f64>() / vals.len() as f64)
                })
                .collect();
            let max_abs = oracle.iter().map(|(_, v)| v.abs()).fold(0.0f64, f64::max);
            for (_, v) in oracle.iter_mut() {
                *v /= max_abs;
            }
            oracle.sort_by(|(sa, va), (sb, vb)| {
                vb.partial_cmp(va).unwrap().then_with(|| sa.cmp(sb))
            });
            let got: Vec<(String, f64)> = r
                .entries
                .iter()
                .map(|e| (e.symbol.as_str().to_owned(), e.value))
                .collect();
            for ((gs, gv), (os, ov)) in got.iter().zip(&oracle) {
                assert_eq!(gs, os);
                assert!((gv - ov).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pearson_examples() {
        // y = 2x exactly.
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 * i as f64)).collect();
        assert!((pearson(&pts).unwrap() - 1.0).abs() < 1e-12);
        // constant y.
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0)).collect();
        assert!(matches!(
            pearson(&pts),
            Err(AggregateError::DegenerateVariance(_))
        ));
    }

    #[test]
    fn trade_count_correlation_twenty_symbol_fixture() {
        let mut active = BTreeMap::new();
        let mut stats = BTreeMap::new();
        let mut oracle_pts = Vec::new();
        for i in 0..20 {
            let s = sym(&format!("S{i:02}"));
            let x = (i as f64 * 0.37).sin() * 0.01 + 0.02;
            let y = 500.0 + 113.0 * (i as f64 * 0.61).cos() + i as f64;
            active.insert(s.clone(), x);
            stats.insert(
                s.clone(),
                ActivityStats { symbol: s, f: 0.5, avg_daily_trades: y, t_trading: 1, t_quiet: 1 },
            );
            oracle_pts.push((x, y));
        }
        let got = trade_count_correlation(&active, &stats).unwrap();
        // Textbook two-pass oracle.
        let n = oracle_pts.len() as f64;
        let mx = oracle_pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = oracle_pts.iter().map(|p| p.1).sum::<f64>() / n;
        let cov: f64 = oracle_pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let vx: f64 = oracle_pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let vy: f64 = oracle_pts.iter().map(|p| (p.1 - my).powi(2)).sum();
        let oracle = cov / (vx * vy).sqrt();
        assert!((got - oracle).abs() < 1e-12);

        let few: BTreeMap<Symbol, f64> =
            active.iter().take(2).map(|(k, v)| (k.clone(), *v)).collect();
        assert!(matches!(
            trade_count_correlation(&few, &stats),
            Err(AggregateError::TooFewSymbols { .. })
        ));
    }

    #[test]
    fn order_by_sector_groups_and_spans() {
        let mut map = SectorMap::default();
        map.insert(sym("A"), "S2");
        map.insert(sym("B"), "S1");
        map.insert(sym("C"), "S1");
        map.insert(sym("D"), "S2");
        let (ordered, spans) = order_by_sector(
            &[sym("A"), sym("B"), sym("C"), sym("D")],
            &map,
        );
        let names: Vec<&str> = ordered.iter().map(Symbol::as_str).collect();
        assert_eq!(names, vec!["B", "C", "A", "D"]);
        assert_eq!(
            spans,
            vec![
                SectorSpan { sector: "S1".into(), start: 0, len: 2 },
                SectorSpan { sector: "S2".into(), start: 2, len: 2 },
            ]
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        /// Scaling all pairwise series by a positive power of two (exact in
        /// floating point) cannot change rank order, and the anchor never
        /// enters its own universe.
        #[test]
        fn rank_invariance_and_anchor_exclusion(
            seedvals in proptest::collection::vec(-100i32..100, 12),
            scale_exp in -8i32..8,
        ) {
            let scale = (2.0f64).powi(scale_exp);
            let n = 4usize;
            let raw = |a: usize, b: usize| seedvals[a * 3 + b % 3] as f64 * 1e-4 + 1e-6;
            let (store, symbols) = full_store(n, raw);
            let (scaled_store, _) = full_store(n, |a, b| raw(a, b) * scale);
            let set: BTreeSet<Symbol> = symbols.iter().cloned().collect();

            let r1 = rank_stocks(Direction::Active, 60, INC, n, &set, &store, false).unwrap();
            let r2 = rank_stocks(Direction::Active, 60, INC, n, &set, &scaled_store, false).unwrap();
            let o1: Vec<&str> = r1.entries.iter().map(|e| e.symbol.as_str()).collect();
            let o2: Vec<&str> = r2.entries.iter().map(|e| e.symbol.as_str()).collect();
            prop_assert_eq!(o1, o2);

            for anchor in &symbols {
                let avg = passive_average(anchor, &set, INC, &store).unwrap();
                prop_assert!(!avg.universe.contains(anchor));
                prop_assert!(avg.points.iter().all(|p| p.n_pairs <= avg.universe.len() as u64));
            }
        }
    }
}
