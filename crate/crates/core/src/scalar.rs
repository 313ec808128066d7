//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::Serialize;

/// Floating-point scalar the identification pipeline is generic over.
///
/// Implemented for `f32` and `f64`. The simulation and analysis code never
/// assumes a particular width; literal constants go through [`Scalar::lit`].
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Serialize
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a sample count or step index into this scalar type.
    #[inline]
    fn from_index(n: usize) -> Self {
        Self::from_usize(n).expect("index representable in scalar type")
    }

    /// Lossy view as `f64`, used for diagnostics and reports.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Rounds `x / step` to the nearest grid index, or `None` when `x` is not a
/// (near-)integer multiple of `step` or is negative.
pub(crate) fn grid_index<T: Scalar>(x: T, step: T) -> Option<usize> {
    let ratio = x / step;
    if !ratio.is_finite() || ratio < -T::lit(0.5) {
        return None;
    }
    let nearest = ratio.round();
    // Relative slack grows with the ratio to absorb representation error of
    // both operands (matters for f32 grids of ~1e5 points).
    let slack = T::lit(1e-6).max(T::lit(16.0) * T::epsilon() * ratio.abs());
    if (ratio - nearest).abs() <= slack {
        nearest.to_usize()
    } else {
        None
    }
}

/// Rounds `x / step` to the nearest index without a divisibility check.
pub(crate) fn nearest_index<T: Scalar>(x: T, step: T) -> usize {
    (x / step).round().max(T::zero()).to_usize().unwrap_or(usize::MAX)
}
