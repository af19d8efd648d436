//! Scalar abstraction for the numeric core.
//!
//! Everything geometric and differentiable in this crate is generic over
//! [`Real`], so the same code runs in `f32` (the precision of shipped
//! checkpoints) and `f64` (the precision used by kinematic oracles and
//! finite-difference gradient checks).

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssignOps};
use rand::Rng;
use rand_distr::StandardNormal;

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + NumAssignOps + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or intermediate.
    fn scalar(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 -> Real conversion")
    }

    /// Widening (or identity) conversion to `f64`.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real -> f64 conversion")
    }

    /// One draw from the standard normal distribution.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One uniform draw from `[0, 1)`.
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Real for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }

    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen()
    }
}

impl Real for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }

    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen()
    }
}
