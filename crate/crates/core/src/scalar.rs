//! Floating-point scalar abstraction used by the learning and evaluation code.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// A real scalar the forest can be trained over.
///
/// `Display` must print the shortest string that parses back to the same
/// value, which holds for the primitive float types. The model file format
/// relies on it for bit-exact round trips.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Display + FromStr + Debug + Default + Sum + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; values are expected to be finite.
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).unwrap_or_else(Self::nan)
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn from_usize_lossy(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).unwrap_or_else(Self::nan)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
