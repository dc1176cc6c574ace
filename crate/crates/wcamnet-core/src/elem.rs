//! Floating-point element abstraction.
//!
//! Training runs in `f32` for speed; numerical verification (finite-difference
//! gradient checks) runs the same graph in `f64`. Everything in the crate that
//! touches tensor data is generic over [`Elem`].

use ndarray::NdFloat;
use rand::distr::uniform::SampleUniform;

/// Scalar type usable as tensor element. Implemented for `f32` and `f64` only.
pub trait Elem: NdFloat + SampleUniform + serde::Serialize + 'static {
    /// Lossy cast from `f64`.
    fn cast(v: f64) -> Self;
    /// Widening cast to `f64`.
    fn to_f64(self) -> f64;
    /// Gauss error function.
    fn erf(self) -> Self;
}

impl Elem for f32 {
    #[inline]
    fn cast(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn erf(self) -> Self {
        libm::erff(self)
    }
}

impl Elem for f64 {
    #[inline]
    fn cast(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn erf(self) -> Self {
        libm::erf(self)
    }
}
