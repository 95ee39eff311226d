//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Draws a uniform value in `[0, 1)`.
    fn unit<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Lossless-where-possible literal conversion.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable")
    }

    #[inline]
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f64 {
    #[inline]
    fn unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f64>()
    }
}

impl Real for f32 {
    #[inline]
    fn unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f32>()
    }
}

/// `x^p` with dedicated paths for the exponents that dominate run time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Power<T> {
    Sqrt,
    InvSqrt,
    General(T),
}

impl<T: Real> Power<T> {
    pub(crate) fn new(p: T) -> Self {
        if p == T::lit(0.5) {
            Power::Sqrt
        } else if p == T::lit(-0.5) {
            Power::InvSqrt
        } else {
            Power::General(p)
        }
    }

    #[inline(always)]
    pub(crate) fn of(self, x: T) -> T {
        match self {
            Power::Sqrt => x.sqrt(),
            Power::InvSqrt => x.sqrt().recip(),
            Power::General(p) => x.powf(p),
        }
    }
}
