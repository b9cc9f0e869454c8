//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point type the solvers are generic over (`f32` or `f64`).
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static {
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("index representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Sign with `sgn(0) = 0`.
    #[inline]
    fn sgn0(self) -> Self {
        if self > Self::zero() {
            Self::one()
        } else if self < Self::zero() {
            -Self::one()
        } else {
            Self::zero()
        }
    }

    /// Positive part `(x)_+`.
    #[inline]
    fn pos(self) -> Self {
        self.max(Self::zero())
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub(crate) fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm<R: Real>(a: &[R]) -> R {
    dot(a, a).sqrt()
}

pub(crate) fn dist<R: Real>(a: &[R], b: &[R]) -> R {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<R>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_convention_at_zero() {
        assert_eq!(0.0f64.sgn0(), 0.0);
        assert_eq!((-0.0f64).sgn0(), 0.0);
        assert_eq!(2.5f32.sgn0(), 1.0);
        assert_eq!((-1e-300f64).sgn0(), -1.0);
    }

    #[test]
    fn positive_part() {
        assert_eq!((-0.5f64).pos(), 0.0);
        assert_eq!(0.25f64.pos(), 0.25);
    }
}
