//! Floating-point abstraction for the dense linear-algebra kernels.
//!
//! The numerical substrate (matrices, eigensolver, matrix exponential) is
//! generic over [`Scalar`] so the same code runs in `f32` or `f64`. The
//! physics layers above fix `f64` through the aliases at the crate root,
//! since their tolerances are stated in absolute double precision.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

pub trait Scalar:
    Float + FloatConst + NumAssign + FromPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an algorithm constant given as an `f64` literal.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal must be representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
