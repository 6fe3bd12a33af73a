//! Scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point scalar the physics is written against (`f32` or `f64`).
///
/// Tolerances quoted throughout the crate (1e-12 unitarity, 1e-10 norms)
/// assume `f64`; `f32` instantiations are supported but only hold to single
/// precision.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Argument where `(sin x / x)^2` falls to one half.
pub const SINC2_HALF_MAX_ARG: f64 = 1.391_557_378_251_510_3;

/// Unnormalized cardinal sine, `sin(x)/x` with the removable singularity filled.
#[inline]
pub fn sinc<T: Scalar>(x: T) -> T {
    if x.abs() < T::lit(1e-8) {
        T::one() - x * x / T::lit(6.0)
    } else {
        x.sin() / x
    }
}
