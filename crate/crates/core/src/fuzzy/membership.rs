//! Piecewise-linear membership functions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum MembershipError {
    #[error("membership breakpoints must be nondecreasing")]
    NonMonotonicBreakpoints,
}

/// Triangular or trapezoidal membership function. Trapezoid shoulders may
/// extend to infinity, giving an open-ended plateau.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MembershipFn<R: Real = f64> {
    Triangle { a: R, b: R, c: R },
    Trapezoid { a: R, b: R, c: R, d: R },
}

impl<R: Real> MembershipFn<R> {
    pub fn triangle(a: R, b: R, c: R) -> Result<Self, MembershipError> {
        if a <= b && b <= c {
            Ok(Self::Triangle { a, b, c })
        } else {
            Err(MembershipError::NonMonotonicBreakpoints)
        }
    }

    pub fn trapezoid(a: R, b: R, c: R, d: R) -> Result<Self, MembershipError> {
        if a <= b && b <= c && c <= d {
            Ok(Self::Trapezoid { a, b, c, d })
        } else {
            Err(MembershipError::NonMonotonicBreakpoints)
        }
    }

    /// Membership degree at `x`, in `[0, 1]`.
    pub fn eval(&self, x: R) -> R {
        match *self {
            Self::Triangle { a, b, c } => {
                if x < a || x > c {
                    R::zero()
                } else if x <= b {
                    rising(x, a, b)
                } else {
                    falling(x, b, c)
                }
            }
            Self::Trapezoid { a, b, c, d } => {
                if x < a || x > d {
                    R::zero()
                } else if x < b {
                    rising(x, a, b)
                } else if x <= c {
                    R::one()
                } else {
                    falling(x, c, d)
                }
            }
        }
    }

    /// A value inside the region of full membership, used by rule-fidelity
    /// tests to produce crisp one-hot inputs.
    pub fn peak(&self) -> R {
        match *self {
            Self::Triangle { b, .. } => b,
            Self::Trapezoid { b, c, .. } => {
                if c.is_infinite() {
                    b + b.abs().max(R::one())
                } else {
                    (b + c) / R::scalar(2.0)
                }
            }
        }
    }
}

fn rising<R: Real>(x: R, a: R, b: R) -> R {
    if b == a {
        R::one()
    } else {
        (x - a) / (b - a)
    }
}

fn falling<R: Real>(x: R, b: R, c: R) -> R {
    if c == b {
        R::one()
    } else {
        (c - x) / (c - b)
    }
}

/// Singleton fuzzification: degree of `value` in every subset of a family.
pub fn fuzzify<R: Real>(value: R, family: &[MembershipFn<R>]) -> Vec<R> {
    family.iter().map(|mf| mf.eval(value)).collect()
}
