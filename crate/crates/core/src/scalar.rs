//! Scalar abstraction: the engine works for any floating-point type.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the engine computes with (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum<Self> + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant (e.g. a configuration value) into `Self`.
    fn from_f(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 must convert to scalar")
    }

    /// Converts a count into `Self`.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count must convert to scalar")
    }

    /// Lossy view as `f64`, used at serialization boundaries.
    fn to_f(self) -> f64 {
        self.to_f64().expect("scalar must convert to f64")
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + Sum<T>
        + Default
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_float_widths_are_real() {
        fn takes_real<F: Real>(x: F) -> F {
            x + F::from_f(1.0)
        }
        assert_eq!(takes_real(1.0f64), 2.0);
        assert_eq!(takes_real(1.0f32), 2.0);
        assert_eq!(<f64 as Real>::from_count(3), 3.0);
    }
}
