//! Trade-sign classification and one-second grid construction.
//!
//! Per-trade signs follow the price-comparison rule: a trade executed at a
//! different price than the preceding one is signed by the price change;
//! a trade at the same price inherits the preceding sign. The sign rule
//! has no predecessor for the first trades of a day, so the leading run of
//! equal-priced trades carries sign 0 until the first price change; those
//! trades contribute 0 to the per-second aggregate but still count toward
//! the second's trade count. Sign state never carries across days.
//!
//! Per-second signs aggregate all trades in the second: `eps[t]` is the
//! sign of the sum of per-trade signs (0 on a buy–sell balance or when no
//! trade occurred), `n_trades[t]` the raw count, and `mid[t]` the midpoint
//! of the last quote at or before `t` (absent before the first quote).
//!
//! # Grid cache format
//!
//! [`write_grid`]/[`read_grid`] serialize a grid as little-endian columns:
//!
//! ```text
//! offset  size          field
//! 0       12            magic "XRSPGRID0001"
//! 12      4             reserved (zero)
//! 16      2             symbol length n (u16)
//! 18      n             symbol (UTF-8)
//! ..      4             day as yyyymmdd (u32)
//! ..      4             grid length L (u32)
//! ..      L             eps (i8)
//! ..      8 L           mid (f64, NaN where absent)
//! ..      2 L           n_trades (u16)
//! ```

use std::io::{Read, Write};

use thiserror::Error;

use crate::ingest::{QuoteRecord, SessionWindow, TickTable, TradeRecord};
use crate::numeric::KahanSum;
use crate::scalar::{cast, cast_count, Scalar};
use crate::types::{Day, Symbol};

/// Magic prefix of the grid cache format.
pub const GRID_MAGIC: &[u8; 12] = b"XRSPGRID0001";

#[derive(Debug, Error)]
pub enum SignsError {
    #[error("no quotes for {symbol} on {day}")]
    NoQuotes { symbol: Symbol, day: Day },
    #[error("no quotes in stream")]
    EmptyQuotes,
    #[error("no grids supplied")]
    NoGrids,
    #[error("grids mix symbols: {0} vs {1}")]
    MixedSymbols(Symbol, Symbol),
    #[error("grid cache: bad magic")]
    BadMagic,
    #[error("grid cache: corrupt field {0}")]
    Corrupt(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-second arrays for one stock-day on the session grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondGrid<T: Scalar> {
    pub symbol: Symbol,
    pub day: Day,
    /// Aggregated trade sign per second, in {-1, 0, +1}.
    pub eps: Vec<i8>,
    /// Prevailing midpoint per second; absent before the first quote.
    pub mid: Vec<Option<T>>,
    /// Number of trades per second.
    pub n_trades: Vec<u16>,
}

impl<T: Scalar> SecondGrid<T> {
    /// Builds the grid for one parsed stock-day.
    pub fn from_table(
        table: &TickTable<T>,
        session: &SessionWindow,
    ) -> Result<Self, SignsError> {
        let len = session.grid_len();
        let signs = trade_signs(&table.trades);
        let (eps, n_trades) = second_signs(&table.trades, &signs, len);
        let mid = midpoint_series(&table.quotes, len).map_err(|_| SignsError::NoQuotes {
            symbol: table.symbol.clone(),
            day: table.day,
        })?;
        Ok(SecondGrid {
            symbol: table.symbol.clone(),
            day: table.day,
            eps,
            mid,
            n_trades,
        })
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }
}

/// Per-trade signs for one day's ordered trades.
///
/// `sign[n] = sgn(S[n] - S[n-1])` when prices differ, else the preceding
/// sign; the leading run before the first price change gets 0.
pub fn trade_signs<T: Scalar>(trades: &[TradeRecord<T>]) -> Vec<i8> {
    let mut signs = Vec::with_capacity(trades.len());
    let mut prev_sign = 0i8;
    let mut prev_price: Option<T> = None;
    for trade in trades {
        let sign = match prev_price {
            Some(p) if trade.price > p => 1,
            Some(p) if trade.price < p => -1,
            _ => prev_sign,
        };
        signs.push(sign);
        prev_sign = sign;
        prev_price = Some(trade.price);
    }
    signs
}

/// Aggregates per-trade signs into per-second `eps` and `n_trades` arrays.
///
/// `eps[t]` is the sign of the per-second sign sum; zero means no trades
/// or a buy–sell balance. Leading sign-0 trades add 0 to the sum but are
/// counted in `n_trades`.
pub fn second_signs<T: Scalar>(
    trades: &[TradeRecord<T>],
    signs: &[i8],
    grid_len: usize,
) -> (Vec<i8>, Vec<u16>) {
    debug_assert_eq!(trades.len(), signs.len());
    let mut sums = vec![0i32; grid_len];
    let mut counts = vec![0u16; grid_len];
    for (trade, &sign) in trades.iter().zip(signs) {
        let t = trade.timestamp as usize;
        if t < grid_len {
            sums[t] += sign as i32;
            counts[t] = counts[t].saturating_add(1);
        }
    }
    let eps = sums.iter().map(|&s| s.signum() as i8).collect();
    (eps, counts)
}

/// Step-function midpoint series: `mid[t]` is the midpoint of the last
/// quote with timestamp <= t, absent before the first quote.
pub fn midpoint_series<T: Scalar>(
    quotes: &[QuoteRecord<T>],
    grid_len: usize,
) -> Result<Vec<Option<T>>, SignsError> {
    if quotes.is_empty() {
        return Err(SignsError::EmptyQuotes);
    }
    let mut mid = vec![None; grid_len];
    let mut qi = 0usize;
    let mut current: Option<T> = None;
    for (t, slot) in mid.iter_mut().enumerate() {
        while qi < quotes.len() && quotes[qi].timestamp as usize <= t {
            current = Some(quotes[qi].midpoint());
            qi += 1;
        }
        *slot = current;
    }
    Ok(mid)
}

/// Trading-activity summary for one symbol over its day set.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ActivityStats<T: Scalar> {
    pub symbol: Symbol,
    /// Relative trading frequency: fraction of grid seconds with a
    /// nonzero aggregated sign. Exactly `t_trading / (t_trading + t_quiet)`.
    pub f: T,
    /// Mean over days of the daily sum of |eps|, so at most one count per
    /// second contributes.
    pub avg_daily_trades: T,
    /// Seconds with nonzero sign, over all days.
    pub t_trading: u64,
    /// Seconds with zero sign, over all days.
    pub t_quiet: u64,
}

/// Computes [`ActivityStats`] over all grids of one symbol.
pub fn activity_stats<T: Scalar>(grids: &[SecondGrid<T>]) -> Result<ActivityStats<T>, SignsError> {
    let first = grids.first().ok_or(SignsError::NoGrids)?;
    let mut t_trading = 0u64;
    let mut total = 0u64;
    let mut daily = KahanSum::<T>::new();
    for grid in grids {
        if grid.symbol != first.symbol {
            return Err(SignsError::MixedSymbols(
                first.symbol.clone(),
                grid.symbol.clone(),
            ));
        }
        let day_trades = grid.eps.iter().filter(|&&e| e != 0).count() as u64;
        t_trading += day_trades;
        total += grid.len() as u64;
        daily.add(cast_count(day_trades));
    }
    let t_quiet = total - t_trading;
    Ok(ActivityStats {
        symbol: first.symbol.clone(),
        f: cast_count::<T>(t_trading) / cast_count(total),
        avg_daily_trades: daily.value() / cast(grids.len() as f64),
        t_trading,
        t_quiet,
    })
}

/// Writes the columnar grid cache. Byte-identical for identical grids.
pub fn write_grid<T: Scalar, W: Write>(grid: &SecondGrid<T>, mut w: W) -> std::io::Result<()> {
    w.write_all(GRID_MAGIC)?;
    w.write_all(&[0u8; 4])?;
    let sym = grid.symbol.as_str().as_bytes();
    w.write_all(&(sym.len() as u16).to_le_bytes())?;
    w.write_all(sym)?;
    w.write_all(&grid.day.as_u32().to_le_bytes())?;
    w.write_all(&(grid.len() as u32).to_le_bytes())?;
    let eps_bytes: Vec<u8> = grid.eps.iter().map(|&e| e as u8).collect();
    w.write_all(&eps_bytes)?;
    for m in &grid.mid {
        let v = m.map_or(f64::NAN, |x| x.to_f64().unwrap_or(f64::NAN));
        w.write_all(&v.to_le_bytes())?;
    }
    for n in &grid.n_trades {
        w.write_all(&n.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a grid cache written by [`write_grid`].
pub fn read_grid<T: Scalar, R: Read>(mut r: R) -> Result<SecondGrid<T>, SignsError> {
    let mut magic = [0u8; 12];
    r.read_exact(&mut magic)?;
    if &magic != GRID_MAGIC {
        return Err(SignsError::BadMagic);
    }
    let mut reserved = [0u8; 4];
    r.read_exact(&mut reserved)?;

    let mut b2 = [0u8; 2];
    r.read_exact(&mut b2)?;
    let sym_len = u16::from_le_bytes(b2) as usize;
    let mut sym = vec![0u8; sym_len];
    r.read_exact(&mut sym)?;
    let symbol = String::from_utf8(sym)
        .ok()
        .and_then(|s| Symbol::new(s).ok())
        .ok_or(SignsError::Corrupt("symbol"))?;

    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let packed = u32::from_le_bytes(b4);
    let day = Day::new(packed / 10_000, packed / 100 % 100, packed % 100)
        .map_err(|_| SignsError::Corrupt("day"))?;

    r.read_exact(&mut b4)?;
    let len = u32::from_le_bytes(b4) as usize;

    let mut eps_bytes = vec![0u8; len];
    r.read_exact(&mut eps_bytes)?;
    let eps: Vec<i8> = eps_bytes.iter().map(|&b| b as i8).collect();
    if eps.iter().any(|&e| !(-1..=1).contains(&e)) {
        return Err(SignsError::Corrupt("eps"));
    }

    let mut mid = Vec::with_capacity(len);
    let mut b8 = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut b8)?;
        let v = f64::from_le_bytes(b8);
        if v.is_nan() {
            mid.push(None);
        } else if v > 0.0 {
            mid.push(Some(cast(v)));
        } else {
            return Err(SignsError::Corrupt("mid"));
        }
    }

    let mut n_trades = Vec::with_capacity(len);
    for _ in 0..len {
        r.read_exact(&mut b2)?;
        n_trades.push(u16::from_le_bytes(b2));
    }

    Ok(SecondGrid { symbol, day, eps, mid, n_trades })
}
