//! Floating point abstraction for the numeric core.
//!
//! All tensor algebra, invariants and network arithmetic are generic over
//! [`Real`], so the same code runs in `f32` or `f64`. The calibration
//! pipeline and all file formats use `f64`.

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

/// Scalar type usable by the numeric core: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal; panics only on non-finite input.
    fn real(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite literal")
    }

    fn to_f64_lossy(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("finite value")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Formats a value with 17 significant digits so that `f64` round-trips
/// bit-exactly through text files.
pub fn format_full<T: Real>(v: T) -> String {
    format!("{:.16e}", v)
}

/// Parses a value previously written by [`format_full`].
pub fn parse_full<T: Real>(s: &str) -> Option<T> {
    s.trim().parse::<T>().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_precision_round_trip() {
        for &v in &[0.1f64, -1.0 / 3.0, 1e-300, std::f64::consts::PI, 0.0] {
            let s = format_full(v);
            let back: f64 = parse_full(&s).unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{s}");
        }
    }

    #[test]
    fn real_literal_is_exact_for_f64() {
        let v = std::f64::consts::E;
        assert_eq!(<f64 as Real>::real(v), v);
    }
}
