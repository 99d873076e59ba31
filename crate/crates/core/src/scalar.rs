//! Scalar abstraction shared by every numeric routine in the crate.

use ndarray::NdFloat;
use num_traits::{FloatConst, FromPrimitive};

/// Floating point types the algorithms are generic over (`f32`, `f64`).
///
/// Implemented automatically for anything satisfying the super-traits.
pub trait Scalar: NdFloat + FloatConst + FromPrimitive + Default + 'static {
    /// Converts an `f64` literal into `Self`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Converts a count into `Self`.
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl<T> Scalar for T where T: NdFloat + FloatConst + FromPrimitive + Default + 'static {}
