//! Compensated summation and moment accumulation.
//!
//! Response averages pool up to ~5×10⁶ samples per series, and the
//! zero-sign scaling identity is checked at 1e-12 relative. Naive
//! summation drops digits at that scale, so every sum in the kernels
//! goes through the Kahan–Babuška (Neumaier) accumulator below.

use crate::scalar::{cast_count, Scalar};

/// Kahan–Babuška compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum<T: Scalar> {
    sum: T,
    compensation: T,
}

impl<T: Scalar> KahanSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            compensation: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, value: T) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    /// Compensated total.
    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.compensation
    }

    /// Folds another accumulator in; order of merges is the caller's
    /// contract for determinism.
    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn sum_iter<I: IntoIterator<Item = T>>(iter: I) -> T {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc.value()
    }
}

/// First and second moments of a sample stream, compensated.
///
/// `n` tracks pushes; see [`mean_and_stderr`] for the derived statistics.
#[derive(Debug, Clone, Copy, Default)]
pub struct MomentSums<T: Scalar> {
    pub sum: KahanSum<T>,
    pub sum_sq: KahanSum<T>,
    pub n: u64,
}

impl<T: Scalar> MomentSums<T> {
    pub fn new() -> Self {
        Self {
            sum: KahanSum::new(),
            sum_sq: KahanSum::new(),
            n: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, x: T) {
        self.sum.add(x);
        self.sum_sq.add(x * x);
        self.n += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
        self.n += other.n;
    }

    pub fn mean(&self) -> Option<T> {
        (self.n > 0).then(|| self.sum.value() / cast_count(self.n))
    }
}

/// Mean and standard error of the mean from sufficient statistics.
///
/// `stderr = sample standard deviation / sqrt(n)`; zero for n < 2 and
/// clamped at zero when rounding drives the variance negative.
pub fn mean_and_stderr<T: Scalar>(sum: T, sum_sq: T, n: u64) -> (T, T) {
    let nf = cast_count::<T>(n);
    let mean = sum / nf;
    if n < 2 {
        return (mean, T::zero());
    }
    let var = (sum_sq - sum * sum / nf) / (nf - T::one());
    let var = var.max(T::zero());
    (mean, (var / nf).sqrt())
}
