//! Trades-and-quotes file parsing, session filtering, and calendar rules.
//!
//! Input files are plain CSV, one pair per stock per day:
//!
//! * trades: header `time,price,volume`
//! * quotes: header `time,bid,ask`
//!
//! `time` is wall-clock `HH:MM:SS` with optional fractional seconds, which
//! are truncated to the containing second. Records outside the session
//! window are dropped; the rest are mapped to session-relative integer
//! seconds and sorted by `(timestamp, sequence)`, where `sequence` is the
//! file-order index within the second (the only tiebreak such files carry).

use std::collections::{BTreeMap, BTreeSet};
use std::env;
use std::io::{BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::numeric::KahanSum;
use crate::scalar::{cast, Scalar};
use crate::types::{Day, InvalidValue, Symbol};

/// Environment variable overriding the session window, `HH:MM:SS-HH:MM:SS`.
pub const SESSION_ENV: &str = "XRESPONSE_SESSION";

/// Default session, chosen to skip the volatile open/close auctions.
pub const DEFAULT_SESSION: &str = "09:40:00-15:50:00";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{file}: unparseable header: expected {expected:?}, found {found:?}")]
    UnparseableHeader {
        file: &'static str,
        expected: &'static str,
        found: String,
    },
    #[error("{file}: empty file")]
    EmptyFile { file: &'static str },
    #[error("non-monotonic timestamps: duplicate (timestamp, sequence) = ({timestamp}, {sequence})")]
    NonMonotonicTimestamps { timestamp: u32, sequence: u32 },
    #[error("no trades")]
    NoTrades,
    #[error("invalid session window {0:?}")]
    InvalidSession(String),
    #[error("sector map: symbol {0} mapped to more than one sector")]
    DuplicateSectorSymbol(Symbol),
    #[error("sector map: malformed line {0}: {1:?}")]
    MalformedSectorLine(usize, String),
    #[error(transparent)]
    Invalid(#[from] InvalidValue),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Half-open window of wall-clock seconds defining one trading session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionWindow {
    start: u32,
    end: u32,
}

impl Default for SessionWindow {
    fn default() -> Self {
        DEFAULT_SESSION.parse().expect("default session parses")
    }
}

impl SessionWindow {
    pub fn new(start: u32, end: u32) -> Result<Self, IngestError> {
        if start >= end || end > 24 * 3600 {
            return Err(IngestError::InvalidSession(format!("{start}..{end}")));
        }
        Ok(Self { start, end })
    }

    /// Reads [`SESSION_ENV`], falling back to the default window.
    pub fn from_env() -> Result<Self, IngestError> {
        match env::var(SESSION_ENV) {
            Ok(s) => s.parse(),
            Err(_) => Ok(Self::default()),
        }
    }

    /// Number of one-second slots in the session grid.
    pub fn grid_len(&self) -> usize {
        (self.end - self.start) as usize
    }

    pub fn start_second(&self) -> u32 {
        self.start
    }

    /// Session-relative second for a wall-clock second, `None` outside the
    /// half-open window.
    pub fn offset(&self, wall: u32) -> Option<u32> {
        (wall >= self.start && wall < self.end).then(|| wall - self.start)
    }

    /// Wall-clock second for a session-relative offset.
    pub fn wall_clock(&self, offset: u32) -> u32 {
        self.start + offset
    }
}

impl FromStr for SessionWindow {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| IngestError::InvalidSession(s.to_owned()))?;
        let start =
            parse_clock(a.trim()).ok_or_else(|| IngestError::InvalidSession(s.to_owned()))?;
        let end =
            parse_clock(b.trim()).ok_or_else(|| IngestError::InvalidSession(s.to_owned()))?;
        SessionWindow::new(start, end)
    }
}

/// `HH:MM:SS[.ffffff]` to whole wall-clock seconds; fractional digits are
/// truncated, never rounded.
fn parse_clock(s: &str) -> Option<u32> {
    let whole = s.split('.').next()?;
    let mut it = whole.split(':');
    let h: u32 = it.next()?.parse().ok()?;
    let m: u32 = it.next()?.parse().ok()?;
    let sec: u32 = it.next()?.parse().ok()?;
    if it.next().is_some() || h > 23 || m > 59 || sec > 59 {
        return None;
    }
    Some(h * 3600 + m * 60 + sec)
}

fn format_clock(wall: u32) -> String {
    format!("{:02}:{:02}:{:02}", wall / 3600, wall / 60 % 60, wall % 60)
}

/// One executed trade, session-relative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeRecord<T: Scalar> {
    /// Seconds since session open.
    pub timestamp: u32,
    /// File-order index within the second.
    pub sequence: u32,
    pub price: T,
    pub volume: u64,
}

/// One best-quote update, session-relative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuoteRecord<T: Scalar> {
    pub timestamp: u32,
    pub sequence: u32,
    pub bid: T,
    pub ask: T,
}

impl<T: Scalar> QuoteRecord<T> {
    /// Crossed or locked market. Such quotes are retained and flagged;
    /// dropping them would break record-count conservation.
    pub fn is_crossed(&self) -> bool {
        self.bid >= self.ask
    }

    pub fn midpoint(&self) -> T {
        (self.bid + self.ask) / cast(2.0)
    }
}

/// Parsed, session-filtered ticks for one stock on one day.
#[derive(Debug, Clone, PartialEq)]
pub struct TickTable<T: Scalar> {
    pub symbol: Symbol,
    pub day: Day,
    pub trades: Vec<TradeRecord<T>>,
    pub quotes: Vec<QuoteRecord<T>>,
}

impl<T: Scalar> TickTable<T> {
    /// Checks the table invariants: timestamps inside the session grid and
    /// strict `(timestamp, sequence)` ordering.
    pub fn validate(&self, session: &SessionWindow) -> Result<(), IngestError> {
        let len = session.grid_len() as u32;
        let check_sorted = |ts: &[(u32, u32)]| -> Result<(), IngestError> {
            for w in ts.windows(2) {
                if w[1] <= w[0] {
                    return Err(IngestError::NonMonotonicTimestamps {
                        timestamp: w[1].0,
                        sequence: w[1].1,
                    });
                }
            }
            Ok(())
        };
        let trades: Vec<_> = self.trades.iter().map(|r| (r.timestamp, r.sequence)).collect();
        let quotes: Vec<_> = self.quotes.iter().map(|r| (r.timestamp, r.sequence)).collect();
        check_sorted(&trades)?;
        check_sorted(&quotes)?;
        if let Some(&(t, s)) = trades.iter().chain(&quotes).find(|(t, _)| *t >= len) {
            return Err(IngestError::NonMonotonicTimestamps { timestamp: t, sequence: s });
        }
        Ok(())
    }
}

/// Per-stream line accounting. Conservation holds by construction:
/// `lines_in = retained + dropped_window + malformed`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct StreamReport {
    pub lines_in: u64,
    pub retained: u64,
    pub dropped_window: u64,
    pub malformed: u64,
    /// Crossed/locked quotes among the retained records (always 0 for trades).
    pub flagged_crossed: u64,
}

impl StreamReport {
    pub fn conserved(&self) -> bool {
        self.lines_in == self.retained + self.dropped_window + self.malformed
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct ParseReport {
    pub trades: StreamReport,
    pub quotes: StreamReport,
}

const TRADES_HEADER: &str = "time,price,volume";
const QUOTES_HEADER: &str = "time,bid,ask";

struct RawLines<R: BufRead> {
    reader: R,
    buf: String,
}

impl<R: BufRead> RawLines<R> {
    /// Advances to the next non-empty line, stripping LF/CRLF terminators.
    /// Returns false at end of input.
    fn advance(&mut self) -> Result<bool, std::io::Error> {
        loop {
            self.buf.clear();
            if self.reader.read_line(&mut self.buf)? == 0 {
                return Ok(false);
            }
            let trimmed = self.buf.trim_end_matches(['\n', '\r']).len();
            self.buf.truncate(trimmed);
            if !self.buf.is_empty() {
                return Ok(true);
            }
        }
    }

    fn line(&self) -> &str {
        &self.buf
    }
}

fn read_header<R: BufRead>(
    lines: &mut RawLines<R>,
    file: &'static str,
    expected: &'static str,
) -> Result<(), IngestError> {
    if !lines.advance()? {
        return Err(IngestError::EmptyFile { file });
    }
    let found = lines.line();
    if found.trim() == expected {
        Ok(())
    } else {
        Err(IngestError::UnparseableHeader {
            file,
            expected,
            found: found.to_owned(),
        })
    }
}

/// Parses a trades stream. Malformed lines are counted, not fatal.
pub fn parse_trades_csv<T: Scalar, R: BufRead>(
    reader: R,
    session: &SessionWindow,
) -> Result<(Vec<TradeRecord<T>>, StreamReport), IngestError> {
    let mut lines = RawLines { reader, buf: String::new() };
    read_header(&mut lines, "trades", TRADES_HEADER)?;

    let mut report = StreamReport::default();
    let mut rows: Vec<(u32, T, u64)> = Vec::new();
    while lines.advance()? {
        report.lines_in += 1;
        let mut fields = lines.line().split(',');
        let parsed = (|| {
            let wall = parse_clock(fields.next()?.trim())?;
            let price: f64 = fields.next()?.trim().parse().ok()?;
            let volume: u64 = fields.next()?.trim().parse().ok()?;
            if fields.next().is_some() || !price.is_finite() || price <= 0.0 || volume == 0 {
                return None;
            }
            Some((wall, price, volume))
        })();
        match parsed {
            None => report.malformed += 1,
            Some((wall, price, volume)) => match session.offset(wall) {
                None => report.dropped_window += 1,
                Some(t) => {
                    report.retained += 1;
                    rows.push((t, cast(price), volume));
                }
            },
        }
    }

    rows.sort_by_key(|r| r.0);
    let mut records = Vec::with_capacity(rows.len());
    let mut seq = 0u32;
    let mut prev_t = None;
    for (t, price, volume) in rows {
        seq = if prev_t == Some(t) { seq + 1 } else { 0 };
        prev_t = Some(t);
        records.push(TradeRecord { timestamp: t, sequence: seq, price, volume });
    }
    Ok((records, report))
}

/// Parses a quotes stream. Crossed quotes are retained and flagged.
pub fn parse_quotes_csv<T: Scalar, R: BufRead>(
    reader: R,
    session: &SessionWindow,
) -> Result<(Vec<QuoteRecord<T>>, StreamReport), IngestError> {
    let mut lines = RawLines { reader, buf: String::new() };
    read_header(&mut lines, "quotes", QUOTES_HEADER)?;

    let mut report = StreamReport::default();
    let mut rows: Vec<(u32, T, T)> = Vec::new();
    while lines.advance()? {
        report.lines_in += 1;
        let mut fields = lines.line().split(',');
        let parsed = (|| {
            let wall = parse_clock(fields.next()?.trim())?;
            let bid: f64 = fields.next()?.trim().parse().ok()?;
            let ask: f64 = fields.next()?.trim().parse().ok()?;
            if fields.next().is_some()
                || !bid.is_finite()
                || !ask.is_finite()
                || bid <= 0.0
                || ask <= 0.0
            {
                return None;
            }
            Some((wall, bid, ask))
        })();
        match parsed {
            None => report.malformed += 1,
            Some((wall, bid, ask)) => match session.offset(wall) {
                None => report.dropped_window += 1,
                Some(t) => {
                    report.retained += 1;
                    if bid >= ask {
                        report.flagged_crossed += 1;
                    }
                    rows.push((t, cast(bid), cast(ask)));
                }
            },
        }
    }

    rows.sort_by_key(|r| r.0);
    let mut records = Vec::with_capacity(rows.len());
    let mut seq = 0u32;
    let mut prev_t = None;
    for (t, bid, ask) in rows {
        seq = if prev_t == Some(t) { seq + 1 } else { 0 };
        prev_t = Some(t);
        records.push(QuoteRecord { timestamp: t, sequence: seq, bid, ask });
    }
    Ok((records, report))
}

/// Parses one stock-day from its trades and quotes streams.
pub fn parse_ticks<T: Scalar, R1: BufRead, R2: BufRead>(
    trades: R1,
    quotes: R2,
    symbol: Symbol,
    day: Day,
    session: &SessionWindow,
) -> Result<(TickTable<T>, ParseReport), IngestError> {
    let (trades, trades_report) = parse_trades_csv(trades, session)?;
    let (quotes, quotes_report) = parse_quotes_csv(quotes, session)?;
    Ok((
        TickTable { symbol, day, trades, quotes },
        ParseReport { trades: trades_report, quotes: quotes_report },
    ))
}

/// Serializes trades back to the input CSV format (parse/serialize round-trips).
pub fn write_trades_csv<T: Scalar, W: Write>(
    records: &[TradeRecord<T>],
    session: &SessionWindow,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "{TRADES_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{}",
            format_clock(session.wall_clock(r.timestamp)),
            r.price,
            r.volume
        )?;
    }
    Ok(())
}

/// Serializes quotes back to the input CSV format.
pub fn write_quotes_csv<T: Scalar, W: Write>(
    records: &[QuoteRecord<T>],
    session: &SessionWindow,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "{QUOTES_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{}",
            format_clock(session.wall_clock(r.timestamp)),
            r.bid,
            r.ask
        )?;
    }
    Ok(())
}

/// Intersection of per-symbol trading calendars.
///
/// A cross-response between two stocks only exists on days both traded, so
/// pair analyses run on the common days. The intersection over an empty
/// symbol set is defined as empty.
pub fn common_days(calendars: &BTreeMap<Symbol, BTreeSet<Day>>) -> BTreeSet<Day> {
    let mut it = calendars.values();
    let Some(first) = it.next() else {
        return BTreeSet::new();
    };
    let mut acc = first.clone();
    for days in it {
        acc = acc.intersection(days).copied().collect();
        if acc.is_empty() {
            break;
        }
    }
    acc
}

/// Average market capitalization proxy: mean over trades of price × volume.
pub fn average_market_cap<T: Scalar>(trades: &[TradeRecord<T>]) -> Result<T, IngestError> {
    if trades.is_empty() {
        return Err(IngestError::NoTrades);
    }
    let mut acc = KahanSum::new();
    for r in trades {
        acc.add(r.price * cast(r.volume as f64));
    }
    Ok(acc.value() / cast(trades.len() as f64))
}

/// Symbol-to-sector mapping.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SectorMap {
    by_symbol: BTreeMap<Symbol, String>,
}

impl SectorMap {
    /// Parses `symbol,sector` lines. A literal `symbol,sector` header line
    /// is tolerated and skipped. A symbol may repeat only with an identical
    /// sector.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self, IngestError> {
        let mut by_symbol = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (idx == 0 && line == "symbol,sector") {
                continue;
            }
            let Some((sym, sector)) = line.split_once(',') else {
                return Err(IngestError::MalformedSectorLine(idx + 1, line.to_owned()));
            };
            let sector = sector.trim();
            if sector.is_empty() {
                return Err(IngestError::MalformedSectorLine(idx + 1, line.to_owned()));
            }
            let symbol = Symbol::new(sym)?;
            if let Some(prev) = by_symbol.insert(symbol.clone(), sector.to_owned()) {
                if prev != sector {
                    return Err(IngestError::DuplicateSectorSymbol(symbol));
                }
            }
        }
        Ok(SectorMap { by_symbol })
    }

    /// The 99-stock, ten-sector map shipped with the crate
    /// (`data/sectors_sp500_99.csv`).
    pub fn sp500_99() -> Self {
        SectorMap::parse(std::io::Cursor::new(include_str!(
            "../data/sectors_sp500_99.csv"
        )))
        .expect("bundled sector map parses")
    }

    pub fn insert(&mut self, symbol: Symbol, sector: impl Into<String>) {
        self.by_symbol.insert(symbol, sector.into());
    }

    pub fn sector_of(&self, symbol: &Symbol) -> Option<&str> {
        self.by_symbol.get(symbol).map(String::as_str)
    }

    /// Distinct sector labels, sorted.
    pub fn sectors(&self) -> BTreeSet<&str> {
        self.by_symbol.values().map(String::as_str).collect()
    }

    /// Symbols of one sector, sorted.
    pub fn members(&self, sector: &str) -> Vec<Symbol> {
        self.by_symbol
            .iter()
            .filter(|(_, s)| s.as_str() == sector)
            .map(|(sym, _)| sym.clone())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.by_symbol.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_symbol.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, &str)> {
        self.by_symbol.iter().map(|(k, v)| (k, v.as_str()))
    }
}
