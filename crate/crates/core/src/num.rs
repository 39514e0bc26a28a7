//! Scalar abstraction shared by the scoring and evaluation code.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Probability-valued scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + FromStr + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal fits the scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Relative closeness, treating two zeros as equal.
pub fn rel_close<T: Real>(a: T, b: T, tol: T) -> bool {
    if a == b {
        return true;
    }
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= tol * scale
}
