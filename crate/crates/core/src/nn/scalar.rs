//! Scalar abstraction so every block runs in f32 (training/inference) and
//! f64 (finite-difference verification) without duplicated code.

use ndarray::NdFloat;
use rustfft::FftNum;

/// Element type usable throughout the network stack.
pub trait Scalar: NdFloat + FftNum {
    const DTYPE: &'static str;
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";
}

/// Shorthand for converting literals into the active scalar type.
#[inline]
pub fn fl<F: Scalar>(v: f64) -> F {
    num_traits::FromPrimitive::from_f64(v).expect("literal representable in scalar type")
}
