//! Scalar abstraction for the numeric core.
//!
//! Everything numeric in this crate is generic over [`Scalar`], which is a
//! thin extension of [`num_traits::Float`]. The two implementors are `f32`
//! and `f64`; concrete aliases for the common types live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, NumAssign};

/// Floating-point scalar used throughout the crate.
pub trait Scalar:
    Float + FloatConst + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or intermediate.
    fn of(v: f64) -> Self;

    /// Widening conversion to `f64`.
    fn as_f64(self) -> f64;

    /// Conversion from a count.
    fn of_usize(v: usize) -> Self {
        Self::of(v as f64)
    }
}

impl Scalar for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn of(v: f64) -> Self {
        v
    }

    fn as_f64(self) -> f64 {
        self
    }
}
