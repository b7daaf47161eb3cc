use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the layout math runs on: `f32` or `f64`.
///
/// All randomness is drawn as `f64` and converted through [`Scalar::from_config`],
/// so a fixed seed produces the same draw sequence for every scalar type.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Convert a config-level `f64` (tolerance, mixing factor, weight) into `Self`.
    fn from_config(value: f64) -> Self {
        Self::from_f64(value).expect("config value representable in scalar type")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
}
