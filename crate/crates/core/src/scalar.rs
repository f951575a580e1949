//! Scalar abstraction for the numerical core.
//!
//! All dynamics, kernels and closed-form predictions are generic over a
//! floating-point scalar so the same code runs in `f32` or `f64`. Concrete
//! aliases live at the crate root.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Floating-point scalar usable by the simulation core: `f32` or `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion for literals and tolerances.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal must convert to scalar")
    }

    /// Conversion back to `f64` for reporting and trace output.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar must convert to f64")
    }

    /// One draw from the standard normal distribution.
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Real for f32 {
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Real for f64 {
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

/// Dot product of two equal-length slices.
pub fn dot<S: Real>(x: &[S], y: &[S]) -> S {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(&a, &b)| a * b).sum()
}

/// Euclidean norm.
pub fn norm2<S: Real>(x: &[S]) -> S {
    dot(x, x).sqrt()
}

/// Rescale `x` to unit Euclidean norm in place. Returns the previous norm.
pub fn normalize<S: Real>(x: &mut [S]) -> S {
    let n = norm2(x);
    if n > S::zero() {
        for v in x.iter_mut() {
            *v /= n;
        }
    }
    n
}
