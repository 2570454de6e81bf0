//! Scalar abstraction for the numeric core.
//!
//! Everything downstream of this module is generic over [`Real`], so the same
//! physics code runs in `f32` (fast exploratory scans) and `f64` (reference
//! numbers, fitting). The crate root re-exports `f64` aliases for the common
//! types; reach for the generic forms only when you actually need `f32`.

use std::fmt::{Debug, Display};
use std::iter::{Product, Sum};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point scalar usable throughout the crate.
///
/// A thin bundle of the `num-traits` capabilities the numeric code needs:
/// IEEE float ops, math constants, conversion from literals, compound
/// assignment, and summation. Implemented for `f32` and `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Product
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Shorthand for converting an `f64` literal into `Self`.
    ///
    /// Panics only if the conversion is unrepresentable, which cannot happen
    /// for finite literals into `f32`/`f64` (overflow maps to infinity).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal must convert into Real scalar")
    }

    /// Lossy conversion back to `f64` (exact for `f64`, widened for `f32`).
    fn to_f64_lossy(self) -> f64 {
        num_traits::cast::<Self, f64>(self).expect("Real scalar must widen to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    fn generic_sum<T: Real>() -> T {
        (0..10).map(|i| T::of(i as f64)).sum()
    }

    #[test]
    fn literal_conversion_roundtrips() {
        assert_eq!(f64::of(0.146), 0.146);
        assert_eq!(f32::of(0.5), 0.5f32);
        assert_eq!(0.25f32.to_f64_lossy(), 0.25);
    }

    #[test]
    fn works_for_both_widths() {
        assert_eq!(generic_sum::<f64>(), 45.0);
        assert_eq!(generic_sum::<f32>(), 45.0f32);
    }
}
