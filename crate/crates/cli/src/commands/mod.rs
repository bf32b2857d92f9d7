pub mod average;
pub mod corr;
pub mod fit;
pub mod ingest;
pub mod matrix;
pub mod rank;
pub mod response;
pub mod synth;
pub mod validate;

use crate::failure::Failure;

/// Thread pool honoring `--jobs`. All parallel work is over independent
/// outputs with a fixed per-task reduction order, so job count never
/// changes emitted bytes.
pub fn pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::from(anyhow::Error::from(e)))
}
