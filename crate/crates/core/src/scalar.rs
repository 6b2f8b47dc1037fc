//! Scalar abstraction: the crate is generic over `f32`/`f64` through a
//! single trait alias combining the algebraic surface needed by the dense
//! linear algebra with conversions from primitive literals.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar usable everywhere in the crate.
pub trait Real: RealField + FromPrimitive + ToPrimitive + Copy {}

impl<T: RealField + FromPrimitive + ToPrimitive + Copy> Real for T {}

/// Convert an `f64` literal (including `INFINITY`) into the working scalar.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal must convert to the working scalar")
}

/// Convert a count into the working scalar.
#[inline]
pub fn real_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("usize must convert to the working scalar")
}

/// Lossy view of the working scalar as `f64` (diagnostics and errors).
#[inline]
pub fn as_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
