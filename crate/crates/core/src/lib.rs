//! Hierarchical navigation core for four-wheel independent steering and
//! driving (4WISD) robots.
//!
//! The stack has two levels. A soft actor-critic policy trained in the
//! bundled 2D simulator emits body twists; a two-stage Mamdani fuzzy
//! controller turns each twist into one of four motion modes and a
//! kinematically consistent set of wheel commands. The numeric core is
//! generic over the scalar type (see [`num::Real`]): `f64` drives the
//! simulator and the kinematic guarantees, `f32` matches the checkpoint
//! tensor format used by the trained policy.

pub mod checkpoint;
pub mod config;
pub mod fuzzy;
pub mod kinematics;
pub mod neural;
pub mod num;
pub mod sac;
pub mod sim;

pub use kinematics::{BodyTwist, MotionMode, Pose2D, RobotGeometry, WheelCommand};
pub use num::Real;

/// Scalar of the simulation and controller stack.
pub type SimScalar = f64;
/// Scalar of trained policy tensors; matches the checkpoint dtype.
pub type PolicyScalar = f32;

/// Network type at simulation precision (oracles, gradient checks).
pub type Mlp64 = neural::Mlp<f64>;
/// Network type at checkpoint precision (training, deployment).
pub type Mlp32 = neural::Mlp<f32>;
/// Agent type used by the shipped training pipeline.
pub type Agent32 = sac::SacAgent<f32>;
