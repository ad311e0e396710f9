//! Scalar abstraction over the floating-point type used by the numeric core.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar: f32 or f64.
pub trait Scalar: Float + FromPrimitive + Debug + Display + Sum + Send + Sync + 'static {
    /// Convert a configuration constant. Panics on a non-representable
    /// value, which only happens for non-finite config input.
    fn from_config(value: f64) -> Self {
        Self::from_f64(value).expect("config value representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl<T> Scalar for T where T: Float + FromPrimitive + Debug + Display + Sum + Send + Sync + 'static {}
