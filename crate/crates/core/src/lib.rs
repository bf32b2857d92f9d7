//! Batch analytics for price cross-responses and trade-sign correlations on a
//! uniform one-second grid.
//!
//! The pipeline runs in stages, each of which is usable on its own:
//!
//! 1. [`ingest`] — parse trades-and-quotes CSV files into session-filtered
//!    per-stock per-day tick tables.
//! 2. [`signs`] — classify trade signs, aggregate them to one-second signs,
//!    and build midpoint series on the session grid.
//! 3. [`response`] — compute pairwise cross/self-response functions and
//!    trade-sign cross-correlators under both zero-sign conventions.
//! 4. [`aggregate`] — passive/active averages, sector averages, normalized
//!    response matrices, rankings, and trade-count correlation diagnostics.
//! 5. [`fit`] — power-law fits of sign correlators with short/long memory
//!    classification.
//! 6. [`synth`] — a deterministic synthetic market generator with a
//!    closed-form response oracle, used to verify the whole pipeline.
//!
//! All numeric kernels are generic over the floating-point [`Scalar`] type;
//! `*64` type aliases at the crate root pin the common `f64` instantiation.

pub mod aggregate;
pub mod fit;
pub mod ingest;
pub mod numeric;
pub mod response;
pub mod scalar;
pub mod signs;
pub mod synth;
pub mod types;

pub use scalar::Scalar;
pub use types::{Day, Symbol};

pub use ingest::{ParseReport, QuoteRecord, SectorMap, SessionWindow, TickTable, TradeRecord};
pub use response::{LagSpec, ResponseSeries, SeriesKind, SeriesPoint, ZeroConvention};
pub use signs::{ActivityStats, SecondGrid};

/// `f64` instantiations of the generic pipeline types.
pub type TradeRecord64 = ingest::TradeRecord<f64>;
pub type QuoteRecord64 = ingest::QuoteRecord<f64>;
pub type TickTable64 = ingest::TickTable<f64>;
pub type SecondGrid64 = signs::SecondGrid<f64>;
pub type ActivityStats64 = signs::ActivityStats<f64>;
pub type ResponseSeries64 = response::ResponseSeries<f64>;
pub type AverageSeries64 = aggregate::AverageSeries<f64>;
pub type ResponseMatrix64 = aggregate::ResponseMatrix<f64>;
pub type Ranking64 = aggregate::Ranking<f64>;
pub type SeriesStore64 = aggregate::SeriesStore<f64>;
pub type PowerLawFit64 = fit::PowerLawFit<f64>;

/// `f32` instantiations, for memory-constrained grid storage.
pub type TickTable32 = ingest::TickTable<f32>;
pub type SecondGrid32 = signs::SecondGrid<f32>;
pub type ResponseSeries32 = response::ResponseSeries<f32>;
