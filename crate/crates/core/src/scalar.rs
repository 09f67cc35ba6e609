//! Scalar abstractions.
//!
//! Tree arithmetic, conditional expectations and the quadratic projection
//! only need field operations, so they are written against [`Scalar`] and run
//! unchanged on `f32`, `f64` and exact [`BigRational`]. Everything that needs
//! logarithms, square roots or iterative solves is written against [`Real`].

use std::fmt::{Debug, Display, LowerExp};
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// Field element usable by the exact-arithmetic parts of the engine.
pub trait Scalar: Num + Clone + PartialOrd + Debug + Neg<Output = Self> + Send + Sync {
    /// Nearest representable value of an `f64` (exact for dyadic rationals).
    fn from_f64_lossy(v: f64) -> Self;
    fn to_f64_lossy(&self) -> f64;
    /// Absolute value.
    fn magnitude(&self) -> Self;
    /// True when `self` is indistinguishable from zero relative to `scale`.
    ///
    /// Floating types use a small multiple of machine epsilon; exact types
    /// only accept zero.
    fn negligible(&self, scale: &Self) -> bool;
}

/// Floating-point scalar used by the solver, the utility lab and the
/// sensitivity engine.
pub trait Real:
    Scalar
    + Float
    + FloatConst
    + FromPrimitive
    + Copy
    + Default
    + Display
    + LowerExp
    + 'static
{
    /// Literal conversion; panics only for values outside the type's range.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("literal out of range")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn from_f64_lossy(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn to_f64_lossy(&self) -> f64 {
                *self as f64
            }
            #[inline]
            fn magnitude(&self) -> Self {
                <$t>::abs(*self)
            }
            #[inline]
            fn negligible(&self, scale: &Self) -> bool {
                <$t>::abs(*self) <= 64.0 * <$t>::EPSILON * <$t>::abs(*scale).max(1.0)
            }
        }
        impl Real for $t {}
    };
}

float_scalar!(f32);
float_scalar!(f64);

impl Scalar for BigRational {
    fn from_f64_lossy(v: f64) -> Self {
        BigRational::from_float(v).unwrap_or_else(|| BigRational::from_integer(BigInt::zero()))
    }
    fn to_f64_lossy(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn magnitude(&self) -> Self {
        Signed::abs(self)
    }
    fn negligible(&self, _scale: &Self) -> bool {
        self.is_zero()
    }
}

/// Shorthand for an exact rational from a numerator and denominator.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Sum of a slice in the scalar's own arithmetic.
pub fn sum<T: Scalar>(values: &[T]) -> T {
    values.iter().cloned().fold(T::zero(), |a, b| a + b)
}

/// Maximum absolute entry (zero for an empty slice).
pub fn max_abs<T: Scalar>(values: &[T]) -> T {
    values.iter().fold(T::zero(), |acc, v| {
        let m = v.magnitude();
        if m > acc {
            m
        } else {
            acc
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_literals_are_exact_for_dyadics() {
        assert_eq!(BigRational::from_f64_lossy(0.375), ratio(3, 8));
        assert!(ratio(0, 5).negligible(&ratio(1, 1)));
        assert!(!ratio(1, 1_000_000_007).negligible(&ratio(1, 1)));
    }

    #[test]
    fn float_negligible_is_relative() {
        assert!(1e-15f64.negligible(&10.0));
        assert!(!1e-10f64.negligible(&1.0));
        assert_eq!(f64::lit(0.5), 0.5);
        assert_eq!(max_abs(&[1.0f32, -3.0, 2.0]), 3.0);
    }
}
