//! Floating-point abstraction shared by every numerical routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the engine is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    /// Converts a count into the scalar type.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `x^e` evaluated as `exp(e·ln x)`.
///
/// Every power in the crate goes through here so that results are
/// bit-identical between modules.
#[inline]
pub fn powr<T: Scalar>(x: T, e: T) -> T {
    if x == T::zero() {
        return if e > T::zero() {
            T::zero()
        } else if e == T::zero() {
            T::one()
        } else {
            T::infinity()
        };
    }
    (e * x.ln()).exp()
}

/// `sinh(e·u) / sinh(e·v)` for `0 ≤ u ≤ v`, `v > 0`, continuous at `e = 0`
/// (where it equals `u / v`) and free of overflow for large `e·v`.
pub(crate) fn sinh_ratio<T: Scalar>(e: T, u: T, v: T) -> T {
    if e == T::zero() {
        return u / v;
    }
    let two = T::of(2.0);
    let num = -(-two * e * u).exp_m1();
    let den = -(-two * e * v).exp_m1();
    (e * (u - v)).exp() * num / den
}
