//! Scalar abstractions.
//!
//! The algebraic layers (sparse storage, constraint transforms, limiters) only
//! need ordered field arithmetic and are written against [`Scalar`], so they
//! run unchanged on `f32`, `f64` and exact rationals. Anything that takes
//! square roots or solves linear systems asks for [`Real`].

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, Num, Signed, ToPrimitive};

/// Ordered field element usable by the algebraic kernels.
pub trait Scalar:
    Copy + Num + Signed + PartialOrd + FromPrimitive + Debug + Display + Send + Sync + 'static
{
    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn half() -> Self {
        Self::one() / Self::two()
    }

    /// Lossy conversion, used only for reporting.
    fn to_f64_lossy(self) -> f64;

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    /// `max{self, 0}`.
    fn pos(self) -> Self {
        self.max_of(Self::zero())
    }

    /// `min{self, 0}`.
    fn neg_part(self) -> Self {
        self.min_of(Self::zero())
    }
}

impl Scalar for f32 {
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

impl Scalar for num_rational::Rational64 {
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Floating point scalar.
pub trait Real: Scalar + Float + FloatConst {
    fn from_f64_lossy(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}
