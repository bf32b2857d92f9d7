//! Floating-point abstraction for the numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Scalar type the analytics are generic over: `f32` or `f64`.
///
/// Everything downstream of parsing (grids, response kernels, averages,
/// fits) works for any implementor. `f64` is the default throughout the
/// CLI; `f32` halves grid memory at the cost of the tight identity
/// tolerances only `f64` can hold.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Lossy conversion from `f64`, for constants and counts.
///
/// Panics only if the target type cannot represent any nearby value, which
/// cannot happen for finite inputs on `f32`/`f64`.
#[inline]
pub(crate) fn cast<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("finite f64 converts to scalar")
}

/// Count-to-scalar conversion used by means and variances.
#[inline]
pub(crate) fn cast_count<T: Scalar>(n: u64) -> T {
    cast(n as f64)
}
