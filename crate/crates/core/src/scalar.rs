//! Floating point scalar abstraction shared by every geometric type.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar used for coordinates and colors: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FromStr
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used for literals and parsed text.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable in scalar")
    }

    fn from_usize_lossy(value: usize) -> Self {
        Self::from_usize(value).expect("usize representable in scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Index of the grid cell containing `coord` for a grid of `resolution` cells on [0,1].
///
/// Values at or past 1.0 clamp to the last cell, negative values to the first.
pub fn cell_of<S: Scalar>(coord: S, resolution: usize) -> usize {
    let scaled = (coord * S::from_usize_lossy(resolution)).floor();
    if scaled <= S::zero() {
        0
    } else {
        scaled.to_usize().unwrap_or(usize::MAX).min(resolution - 1)
    }
}
