//! Scalar abstraction for the math kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the filter, eigen and classifier kernels are generic over.
/// Implemented by `f32` and `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + ScalarOperand + Debug + Display + 'static
{
    /// Lossless-enough conversion from `f64` literals used in designs.
    fn from_f64_lit(v: f64) -> Self {
        Self::from_f64(v).expect("scalar conversion")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + ScalarOperand + Debug + Display + 'static
{
}
