//! Identifiers shared across the pipeline: stock symbols and trading days.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct InvalidValue(pub String);

/// Stock ticker symbol.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Symbol(String);

impl Symbol {
    pub fn new(s: impl Into<String>) -> Result<Self, InvalidValue> {
        let s = s.into();
        let t = s.trim();
        if t.is_empty() {
            return Err(InvalidValue("empty symbol".into()));
        }
        if t.contains(',') || t.chars().any(char::is_whitespace) {
            return Err(InvalidValue(format!("symbol {t:?} contains separators")));
        }
        Ok(Symbol(t.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Symbol {
    type Err = InvalidValue;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Symbol::new(s)
    }
}

/// Calendar date of one trading session, kept as packed `yyyymmdd`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Day(u32);

impl Day {
    pub fn new(year: u32, month: u32, day: u32) -> Result<Self, InvalidValue> {
        if !(1900..=2999).contains(&year) || !(1..=12).contains(&month) {
            return Err(InvalidValue(format!("invalid date {year}-{month}-{day}")));
        }
        if day == 0 || day > days_in_month(year, month) {
            return Err(InvalidValue(format!("invalid date {year}-{month}-{day}")));
        }
        Ok(Day(year * 10_000 + month * 100 + day))
    }

    pub fn year(&self) -> u32 {
        self.0 / 10_000
    }

    pub fn month(&self) -> u32 {
        self.0 / 100 % 100
    }

    pub fn day(&self) -> u32 {
        self.0 % 100
    }

    /// Next calendar day, month- and leap-aware.
    pub fn succ(&self) -> Day {
        let (y, m, d) = (self.year(), self.month(), self.day());
        if d < days_in_month(y, m) {
            Day(self.0 + 1)
        } else if m < 12 {
            Day(y * 10_000 + (m + 1) * 100 + 1)
        } else {
            Day((y + 1) * 10_000 + 101)
        }
    }

    pub fn as_u32(&self) -> u32 {
        self.0
    }
}

fn days_in_month(year: u32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            if year.is_multiple_of(4) && (!year.is_multiple_of(100) || year.is_multiple_of(400)) {
                29
            } else {
                28
            }
        }
        _ => 0,
    }
}

impl fmt::Display for Day {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year(), self.month(), self.day())
    }
}

impl FromStr for Day {
    type Err = InvalidValue;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split('-').collect();
        if parts.len() != 3 {
            return Err(InvalidValue(format!("expected YYYY-MM-DD, got {s:?}")));
        }
        let parse = |p: &str| {
            p.parse::<u32>()
                .map_err(|_| InvalidValue(format!("expected YYYY-MM-DD, got {s:?}")))
        };
        Day::new(parse(parts[0])?, parse(parts[1])?, parse(parts[2])?)
    }
}

impl From<Day> for String {
    fn from(d: Day) -> String {
        d.to_string()
    }
}

impl TryFrom<String> for Day {
    type Error = InvalidValue;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}
