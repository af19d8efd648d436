//! Macro and micro kinematics of a four-wheel independent steering and
//! driving (4WISD) platform.
//!
//! The macro level maps body-frame twists to global pose rates; the micro
//! level relates the eight wheel variables (four steering angles, four
//! signed wheel speeds) to the body twist through per-wheel rolling
//! constraints. The inverse maps are closed forms, one per [`MotionMode`];
//! the forward map is the least-squares resolution of the overdetermined
//! rolling-constraint system.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Real;

/// Angular threshold below which a yaw rate is treated as zero.
///
/// Shared by the steering-mode straight-rolling branch and the fuzzy
/// controller's sentinel handling.
pub const OMEGA_EPS: f64 = 1e-6;

/// Linear-velocity threshold below which a component is treated as zero.
pub const VEL_EPS: f64 = 1e-6;

/// Wheel index order used throughout: front-left, front-right, rear-left,
/// rear-right.
pub const WHEEL_LABELS: [&str; 4] = ["fl", "fr", "rl", "rr"];

/// Planar pose `(x, y, theta)` with `theta` normalized to `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D<R: Real = f64> {
    pub x: R,
    pub y: R,
    pub theta: R,
}

impl<R: Real> Pose2D<R> {
    /// Build a pose, normalizing the heading into `(-pi, pi]`.
    pub fn new(x: R, y: R, theta: R) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn origin() -> Self {
        Self::new(R::zero(), R::zero(), R::zero())
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub fn normalize_angle<R: Real>(angle: R) -> R {
    let two_pi = R::scalar(std::f64::consts::TAU);
    let pi = R::scalar(std::f64::consts::PI);
    let mut a = angle % two_pi;
    if a > pi {
        a = a - two_pi;
    } else if a <= -pi {
        a = a + two_pi;
    }
    a
}

/// Body-frame velocity command `(vx, vy, wz)`: longitudinal, lateral
/// (left-positive), and yaw rate (counter-clockwise positive).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyTwist<R: Real = f64> {
    pub vx: R,
    pub vy: R,
    pub wz: R,
}

impl<R: Real> BodyTwist<R> {
    pub fn new(vx: R, vy: R, wz: R) -> Self {
        Self { vx, vy, wz }
    }

    pub fn zero() -> Self {
        Self::new(R::zero(), R::zero(), R::zero())
    }

    /// Clamp each component to the geometry's velocity limits.
    pub fn clamped(self, geo: &RobotGeometry<R>) -> Self {
        Self {
            vx: clamp_abs(self.vx, geo.vx_max),
            vy: clamp_abs(self.vy, geo.vy_max),
            wz: clamp_abs(self.wz, geo.wz_max),
        }
    }

    /// Euclidean norm of the planar velocity.
    pub fn speed(self) -> R {
        (self.vx * self.vx + self.vy * self.vy).sqrt()
    }
}

fn clamp_abs<R: Real>(v: R, lim: R) -> R {
    v.max(-lim).min(lim)
}

/// Four steering angles and four signed wheel speeds, wheel order
/// `(fl, fr, rl, rr)`. Steering angles live in `(-pi/2, pi/2]`; direction
/// reversal is carried by the sign of the wheel speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WheelCommand<R: Real = f64> {
    /// Steering angles (rad), measured from the body x-axis.
    pub delta: [R; 4],
    /// Signed wheel speeds (m/s) along each wheel's steering direction.
    pub speed: [R; 4],
}

impl<R: Real> WheelCommand<R> {
    pub fn new(delta: [R; 4], speed: [R; 4]) -> Self {
        Self { delta, speed }
    }

    /// All wheels straight and stopped.
    pub fn stopped() -> Self {
        Self::new([R::zero(); 4], [R::zero(); 4])
    }
}

/// Physical parameters of the platform.
///
/// `mass` and the derived inertia are informational (they motivate the
/// fuzzy energy-ratio variable); only the lengths and velocity limits
/// enter the kinematic maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotGeometry<R: Real = f64> {
    /// Wheelbase L (m): longitudinal distance between front and rear axles.
    pub wheelbase: R,
    /// Steering track W (m): lateral distance between left and right wheels.
    pub track: R,
    /// Maximum steering magnitude (rad) in steering/oblique modes.
    pub delta_lim: R,
    /// Platform mass (kg).
    pub mass: R,
    pub vx_max: R,
    pub vy_max: R,
    pub wz_max: R,
    /// Maximum wheel speed magnitude (m/s).
    pub wheel_speed_max: R,
}

impl<R: Real> Default for RobotGeometry<R> {
    fn default() -> Self {
        Self {
            wheelbase: R::scalar(2.03),
            track: R::scalar(1.02),
            delta_lim: R::scalar(std::f64::consts::FRAC_PI_4),
            mass: R::scalar(100.0),
            vx_max: R::scalar(0.75),
            vy_max: R::scalar(0.35),
            wz_max: R::scalar(0.32),
            wheel_speed_max: R::scalar(1.2),
        }
    }
}

impl<R: Real> RobotGeometry<R> {
    /// Moment of inertia about the vertical axis, `M (L^2 + W^2) / 12`.
    pub fn inertia(&self) -> R {
        self.mass * (self.wheelbase * self.wheelbase + self.track * self.track)
            / R::scalar(12.0)
    }

    /// Radius of the circle through the wheel contact points,
    /// `sqrt((L/2)^2 + (W/2)^2)`.
    pub fn r_spin(&self) -> R {
        let half = R::scalar(0.5);
        let hl = self.wheelbase * half;
        let hw = self.track * half;
        (hl * hl + hw * hw).sqrt()
    }

    /// Minimum steering-mode turning radius,
    /// `(W tan(pi/2 - delta_lim) + L) / 2`.
    pub fn r_min(&self) -> R {
        let half_pi = R::scalar(std::f64::consts::FRAC_PI_2);
        (self.track * (half_pi - self.delta_lim).tan() + self.wheelbase) / R::scalar(2.0)
    }

    /// Wheel contact positions in the body frame, order `(fl, fr, rl, rr)`.
    pub fn wheel_positions(&self) -> [(R, R); 4] {
        let half = R::scalar(0.5);
        let hl = self.wheelbase * half;
        let hw = self.track * half;
        [(hl, hw), (hl, -hw), (-hl, hw), (-hl, -hw)]
    }
}

/// The four constrained wheel configurations the low-level controller
/// chooses between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MotionMode {
    /// SM: Ackermann-like turning about a center on the transverse axis.
    #[serde(rename = "SM")]
    Steering,
    /// OM: all wheels share one angle; straight diagonal translation.
    #[serde(rename = "OM")]
    Oblique,
    /// LM: all wheels at 90 degrees; pure sideways translation.
    #[serde(rename = "LM")]
    Lateral,
    /// RM: in-place rotation about the geometric center.
    #[serde(rename = "RM")]
    Rotation,
}

impl MotionMode {
    pub const ALL: [MotionMode; 4] = [
        MotionMode::Steering,
        MotionMode::Oblique,
        MotionMode::Lateral,
        MotionMode::Rotation,
    ];

    /// Index into mode-ordered arrays (SM, OM, LM, RM).
    pub fn index(self) -> usize {
        match self {
            MotionMode::Steering => 0,
            MotionMode::Oblique => 1,
            MotionMode::Lateral => 2,
            MotionMode::Rotation => 3,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            MotionMode::Steering => "SM",
            MotionMode::Oblique => "OM",
            MotionMode::Lateral => "LM",
            MotionMode::Rotation => "RM",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "SM" => Some(MotionMode::Steering),
            "OM" => Some(MotionMode::Oblique),
            "LM" => Some(MotionMode::Lateral),
            "RM" => Some(MotionMode::Rotation),
            _ => None,
        }
    }
}

impl fmt::Display for MotionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KinematicsError {
    /// The requested twist cannot be realized by the selected mode.
    #[error("twist infeasible for {mode}: {reason}")]
    InfeasibleTwist { mode: MotionMode, reason: String },
}

/// Rotate a body twist into global pose rates `(dx, dy, dtheta)`.
pub fn body_to_global<R: Real>(pose: &Pose2D<R>, twist: &BodyTwist<R>) -> (R, R, R) {
    let (s, c) = pose.theta.sin_cos();
    (
        c * twist.vx - s * twist.vy,
        s * twist.vx + c * twist.vy,
        twist.wz,
    )
}

/// Advance a pose by one explicit-Euler step of `dt` seconds.
pub fn integrate_pose<R: Real>(pose: &Pose2D<R>, twist: &BodyTwist<R>, dt: R) -> Pose2D<R> {
    debug_assert!(dt > R::zero());
    let (dx, dy, dth) = body_to_global(pose, twist);
    Pose2D::new(pose.x + dx * dt, pose.y + dy * dt, pose.theta + dth * dt)
}

/// Rolling-constraint matrix rows for one wheel at `(x, y)`:
/// `v cos(delta) = vx - wz*y` and `v sin(delta) = vy + wz*x`.
fn constraint_rows<R: Real>(x: R, y: R) -> [[R; 3]; 2] {
    [
        [R::one(), R::zero(), -y],
        [R::zero(), R::one(), x],
    ]
}

/// Solve the symmetric positive-definite 3x3 system `m * t = rhs` by
/// Gaussian elimination with partial pivoting.
fn solve_3x3<R: Real>(mut m: [[R; 3]; 3], mut rhs: [R; 3]) -> [R; 3] {
    for col in 0..3 {
        let mut pivot = col;
        for row in (col + 1)..3 {
            if m[row][col].abs() > m[pivot][col].abs() {
                pivot = row;
            }
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        let p = m[col][col];
        for row in (col + 1)..3 {
            let f = m[row][col] / p;
            for k in col..3 {
                m[row][k] = m[row][k] - f * m[col][k];
            }
            rhs[row] = rhs[row] - f * rhs[col];
        }
    }
    let mut t = [R::zero(); 3];
    for row in (0..3).rev() {
        let mut acc = rhs[row];
        for k in (row + 1)..3 {
            acc = acc - m[row][k] * t[k];
        }
        t[row] = acc / m[row][row];
    }
    t
}

/// Best-fit body twist for a wheel command: the least-squares solution of
/// the eight rolling constraints at the four wheel positions.
pub fn forward_kinematics<R: Real>(cmd: &WheelCommand<R>, geo: &RobotGeometry<R>) -> BodyTwist<R> {
    let mut ata = [[R::zero(); 3]; 3];
    let mut atb = [R::zero(); 3];
    for (i, &(x, y)) in geo.wheel_positions().iter().enumerate() {
        let (s, c) = cmd.delta[i].sin_cos();
        let b = [cmd.speed[i] * c, cmd.speed[i] * s];
        for (row, bval) in constraint_rows(x, y).iter().zip(b) {
            for j in 0..3 {
                for k in 0..3 {
                    ata[j][k] = ata[j][k] + row[j] * row[k];
                }
                atb[j] = atb[j] + row[j] * bval;
            }
        }
    }
    let t = solve_3x3(ata, atb);
    BodyTwist::new(t[0], t[1], t[2])
}

/// Root-mean-square residual of the eight rolling constraints after
/// fitting the best twist. Zero iff the command is kinematically
/// consistent; positive residual means the wheels fight each other.
pub fn slip_residual<R: Real>(cmd: &WheelCommand<R>, geo: &RobotGeometry<R>) -> R {
    let twist = forward_kinematics(cmd, geo);
    let mut sse = R::zero();
    for (i, &(x, y)) in geo.wheel_positions().iter().enumerate() {
        let (s, c) = cmd.delta[i].sin_cos();
        let rx = cmd.speed[i] * c - (twist.vx - twist.wz * y);
        let ry = cmd.speed[i] * s - (twist.vy + twist.wz * x);
        sse = sse + rx * rx + ry * ry;
    }
    (sse / R::scalar(8.0)).sqrt()
}

/// Fold a wheel velocity vector into a steering angle in `(-pi/2, pi/2]`
/// plus a signed rolling speed.
fn fold_wheel<R: Real>(vx: R, vy: R) -> (R, R) {
    let speed = (vx * vx + vy * vy).sqrt();
    if speed == R::zero() {
        return (R::zero(), R::zero());
    }
    let pi = R::scalar(std::f64::consts::PI);
    let half_pi = R::scalar(std::f64::consts::FRAC_PI_2);
    let theta = vy.atan2(vx);
    if theta > half_pi {
        (theta - pi, -speed)
    } else if theta <= -half_pi {
        (theta + pi, -speed)
    } else {
        (theta, speed)
    }
}

/// Mode-constrained inverse kinematics: produce the wheel command that
/// realizes `twist` under `mode`'s constraints.
///
/// The caller is expected to hand in a twist already inside the mode's
/// feasible set (the fuzzy controller owns that projection); anything
/// else is an [`KinematicsError::InfeasibleTwist`]. The one documented
/// exception is steering mode, which admits no lateral velocity and
/// silently drops `vy`.
pub fn inverse_kinematics<R: Real>(
    twist: &BodyTwist<R>,
    mode: MotionMode,
    geo: &RobotGeometry<R>,
) -> Result<WheelCommand<R>, KinematicsError> {
    let omega_eps = R::scalar(OMEGA_EPS);
    let vel_eps = R::scalar(VEL_EPS);
    match mode {
        MotionMode::Steering => {
            if twist.wz.abs() < omega_eps {
                // Straight rolling: the wz -> 0 limit of the ICR geometry.
                return Ok(WheelCommand::new([R::zero(); 4], [twist.vx; 4]));
            }
            let radius = twist.vx / twist.wz;
            // Relative slack absorbs the rounding of callers that project
            // exactly onto the minimum radius.
            if radius.abs() * (R::one() + R::scalar(1e-9)) < geo.r_min() {
                return Err(KinematicsError::InfeasibleTwist {
                    mode,
                    reason: format!(
                        "turning radius {:.4} below minimum {:.4}",
                        radius.as_f64(),
                        geo.r_min().as_f64()
                    ),
                });
            }
            // ICR at (0, R); wheel velocity is wz x (position - ICR).
            let mut delta = [R::zero(); 4];
            let mut speed = [R::zero(); 4];
            for (i, &(x, y)) in geo.wheel_positions().iter().enumerate() {
                let vxw = twist.wz * (radius - y);
                let vyw = twist.wz * x;
                let (d, v) = fold_wheel(vxw, vyw);
                delta[i] = d;
                speed[i] = v;
            }
            Ok(WheelCommand::new(delta, speed))
        }
        MotionMode::Oblique => {
            if twist.wz.abs() >= omega_eps {
                return Err(KinematicsError::InfeasibleTwist {
                    mode,
                    reason: "oblique mode admits no yaw rate".into(),
                });
            }
            if twist.vx.abs() < vel_eps {
                if twist.vy.abs() < vel_eps {
                    return Ok(WheelCommand::stopped());
                }
                return Err(KinematicsError::InfeasibleTwist {
                    mode,
                    reason: "velocity direction exceeds the steering limit".into(),
                });
            }
            let alpha = (twist.vy / twist.vx).atan();
            if alpha.abs() > geo.delta_lim {
                return Err(KinematicsError::InfeasibleTwist {
                    mode,
                    reason: format!(
                        "offset angle {:.4} exceeds steering limit {:.4}",
                        alpha.as_f64(),
                        geo.delta_lim.as_f64()
                    ),
                });
            }
            let v = twist.speed() * twist.vx.signum();
            Ok(WheelCommand::new([alpha; 4], [v; 4]))
        }
        MotionMode::Lateral => {
            if twist.vx.abs() >= vel_eps || twist.wz.abs() >= omega_eps {
                return Err(KinematicsError::InfeasibleTwist {
                    mode,
                    reason: "lateral mode admits only vy".into(),
                });
            }
            let half_pi = R::scalar(std::f64::consts::FRAC_PI_2);
            Ok(WheelCommand::new([half_pi; 4], [twist.vy; 4]))
        }
        MotionMode::Rotation => {
            if twist.vx.abs() >= vel_eps || twist.vy.abs() >= vel_eps {
                return Err(KinematicsError::InfeasibleTwist {
                    mode,
                    reason: "rotation mode admits only wz".into(),
                });
            }
            let mut delta = [R::zero(); 4];
            let mut speed = [R::zero(); 4];
            for (i, &(x, y)) in geo.wheel_positions().iter().enumerate() {
                let (d, v) = fold_wheel(-twist.wz * y, twist.wz * x);
                delta[i] = d;
                speed[i] = v;
            }
            Ok(WheelCommand::new(delta, speed))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn geo() -> RobotGeometry {
        RobotGeometry::default()
    }

    /// Independent least-squares oracle exploiting the symmetric wheel
    /// layout: with sum(x_i) = sum(y_i) = 0 the normal matrix is diagonal,
    /// so each twist component has a closed form.
    fn least_squares_oracle(cmd: &WheelCommand, geo: &RobotGeometry) -> (BodyTwist, f64) {
        let pos = geo.wheel_positions();
        let mut vx = 0.0;
        let mut vy = 0.0;
        let mut num_w = 0.0;
        let mut den_w = 0.0;
        for i in 0..4 {
            let (x, y) = pos[i];
            let c = cmd.delta[i].cos();
            let s = cmd.delta[i].sin();
            vx += cmd.speed[i] * c / 4.0;
            vy += cmd.speed[i] * s / 4.0;
            num_w += x * cmd.speed[i] * s - y * cmd.speed[i] * c;
            den_w += x * x + y * y;
        }
        let wz = num_w / den_w;
        let mut sse = 0.0;
        for i in 0..4 {
            let (x, y) = pos[i];
            let c = cmd.delta[i].cos();
            let s = cmd.delta[i].sin();
            sse += (cmd.speed[i] * c - (vx - wz * y)).powi(2);
            sse += (cmd.speed[i] * s - (vy + wz * x)).powi(2);
        }
        (BodyTwist::new(vx, vy, wz), (sse / 8.0).sqrt())
    }

    #[test]
    fn body_to_global_identity_rotation() {
        let pose: Pose2D = Pose2D::new(0.0, 0.0, 0.0);
        let (dx, dy, dth) = body_to_global(&pose, &BodyTwist::new(1.0, 0.0, 0.0));
        assert!((dx - 1.0).abs() < 1e-15);
        assert!(dy.abs() < 1e-15);
        assert!(dth.abs() < 1e-15);
    }

    #[test]
    fn body_to_global_quarter_turn() {
        let pose = Pose2D::new(0.0, 0.0, FRAC_PI_2);
        let (dx, dy, _) = body_to_global(&pose, &BodyTwist::new(1.0, 0.0, 0.0));
        assert!(dx.abs() < 1e-15);
        assert!((dy - 1.0).abs() < 1e-15);
    }

    #[test]
    fn body_to_global_diagonal() {
        let pose = Pose2D::new(0.0, 0.0, FRAC_PI_4);
        let (dx, dy, dth) = body_to_global(&pose, &BodyTwist::new(1.0, 1.0, 0.5));
        assert!(dx.abs() < 1e-15);
        assert!((dy - 2.0_f64.sqrt()).abs() < 1e-12);
        assert!((dth - 0.5).abs() < 1e-15);
    }

    #[test]
    fn body_to_global_is_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let pose = Pose2D::new(0.0, 0.0, rng.gen_range(-PI..PI));
            let twist = BodyTwist::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let (dx, dy, _) = body_to_global(&pose, &twist);
            let before = (twist.vx.powi(2) + twist.vy.powi(2)).sqrt();
            let after = (dx * dx + dy * dy).sqrt();
            assert!((before - after).abs() < 1e-12);
        }
    }

    #[test]
    fn integrate_pose_straight() {
        let p: Pose2D = integrate_pose(&Pose2D::origin(), &BodyTwist::new(1.0, 0.0, 0.0), 0.1);
        assert!((p.x - 0.1).abs() < 1e-15);
        assert!(p.y.abs() < 1e-15);
    }

    #[test]
    fn integrate_pose_theta_boundary() {
        let p = integrate_pose(&Pose2D::origin(), &BodyTwist::new(0.0, 0.0, PI), 1.0);
        // pi stays pi in (-pi, pi].
        assert!((p.theta - PI).abs() < 1e-15);
    }

    #[test]
    fn integrate_pose_rotated_heading() {
        let p = integrate_pose(
            &Pose2D::new(0.0, 0.0, FRAC_PI_2),
            &BodyTwist::new(0.5, 0.0, 0.0),
            0.2,
        );
        assert!(p.x.abs() < 1e-15);
        assert!((p.y - 0.1).abs() < 1e-15);
        assert!((p.theta - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn normalize_angle_range() {
        for k in -20..20 {
            let a = 0.37 * k as f64;
            let n = normalize_angle(a);
            assert!(n > -PI && n <= PI, "angle {a} normalized to {n}");
            // Same direction modulo 2*pi.
            assert!(((a - n) / std::f64::consts::TAU).rem_euclid(1.0) < 1e-9);
        }
        assert_eq!(normalize_angle(-PI), PI);
    }

    #[test]
    fn forward_kinematics_straight_rolling() {
        let cmd = WheelCommand::new([0.0; 4], [0.5; 4]);
        let t = forward_kinematics(&cmd, &geo());
        assert!((t.vx - 0.5).abs() < 1e-12);
        assert!(t.vy.abs() < 1e-12);
        assert!(t.wz.abs() < 1e-12);
    }

    #[test]
    fn forward_kinematics_lateral_geometry() {
        let cmd = WheelCommand::new([FRAC_PI_2; 4], [0.3; 4]);
        let t = forward_kinematics(&cmd, &geo());
        assert!(t.vx.abs() < 1e-12);
        assert!((t.vy - 0.3).abs() < 1e-12);
        assert!(t.wz.abs() < 1e-12);
    }

    #[test]
    fn forward_inverse_round_trip_steering() {
        let twist = BodyTwist::new(0.5, 0.0, 0.1);
        let cmd = inverse_kinematics(&twist, MotionMode::Steering, &geo()).unwrap();
        let back = forward_kinematics(&cmd, &geo());
        assert!((back.vx - 0.5).abs() < 1e-9);
        assert!(back.vy.abs() < 1e-9);
        assert!((back.wz - 0.1).abs() < 1e-9);
    }

    #[test]
    fn inverse_kinematics_rotation_example() {
        let g = geo();
        let cmd = inverse_kinematics(&BodyTwist::new(0.0, 0.0, 0.2), MotionMode::Rotation, &g)
            .unwrap();
        let expect_delta = (2.03_f64 / 1.02).atan(); // 1.1052 rad
        let expect_speed = 0.2 * (1.015_f64.powi(2) + 0.51_f64.powi(2)).sqrt(); // 0.2272 m/s
        assert!((expect_delta - 1.1052).abs() < 1e-4);
        assert!((expect_speed - 0.2272).abs() < 1e-4);
        for i in 0..4 {
            assert!((cmd.delta[i].abs() - expect_delta).abs() < 1e-12);
            assert!((cmd.speed[i].abs() - expect_speed).abs() < 1e-12);
        }
        assert!(slip_residual(&cmd, &g) < 1e-12);
    }

    #[test]
    fn inverse_kinematics_lateral_example() {
        let cmd = inverse_kinematics(&BodyTwist::new(0.0, 0.3, 0.0), MotionMode::Lateral, &geo())
            .unwrap();
        for i in 0..4 {
            assert_eq!(cmd.delta[i], FRAC_PI_2);
            assert_eq!(cmd.speed[i], 0.3);
        }
    }

    #[test]
    fn inverse_kinematics_steering_example() {
        let g = geo();
        let cmd = inverse_kinematics(&BodyTwist::new(0.5, 0.0, 0.1), MotionMode::Steering, &g)
            .unwrap();
        // R = 5 m; front-left wheel sees R - W/2 = 4.49 m.
        let expect_delta = (1.015_f64 / 4.49).atan();
        let expect_speed = 0.1 * (1.015_f64.powi(2) + 4.49_f64.powi(2)).sqrt();
        assert!((expect_delta - 0.2224).abs() < 1e-4);
        assert!((expect_speed - 0.4603).abs() < 1e-4);
        assert!((cmd.delta[0] - expect_delta).abs() < 1e-12);
        assert!((cmd.speed[0] - expect_speed).abs() < 1e-12);
        // Front/rear antisymmetry.
        assert!((cmd.delta[0] + cmd.delta[2]).abs() < 1e-12);
        assert!((cmd.delta[1] + cmd.delta[3]).abs() < 1e-12);
    }

    #[test]
    fn r_min_formula() {
        let g = geo();
        assert!((g.r_min() - 1.525).abs() < 1e-12);
    }

    #[test]
    fn slip_residual_consistent_commands() {
        let g = geo();
        let cmd = inverse_kinematics(&BodyTwist::new(0.4, 0.0, 0.15), MotionMode::Steering, &g)
            .unwrap();
        assert!(slip_residual(&cmd, &g) <= 1e-9);
    }

    #[test]
    fn slip_residual_contradictory_rolling() {
        let cmd = WheelCommand::new([0.0; 4], [1.0, 1.0, 1.0, -1.0]);
        assert!(slip_residual(&cmd, &geo()) > 0.1);
    }

    #[test]
    fn slip_residual_matches_least_squares_oracle() {
        let g = geo();
        let cmd = WheelCommand::new([0.0; 4], [0.6, 0.4, 0.6, 0.4]);
        let (oracle_twist, oracle_res) = least_squares_oracle(&cmd, &g);
        let twist = forward_kinematics(&cmd, &g);
        assert!((twist.vx - 0.5).abs() < 1e-12, "best-fit vx is the mean speed");
        assert!((twist.vx - oracle_twist.vx).abs() < 1e-12);
        assert!((twist.vy - oracle_twist.vy).abs() < 1e-12);
        assert!((twist.wz - oracle_twist.wz).abs() < 1e-12);
        assert!((slip_residual(&cmd, &g) - oracle_res).abs() < 1e-12);
        assert!(oracle_res > 0.0);
    }

    #[test]
    fn forward_kinematics_matches_oracle_on_random_commands() {
        let g = geo();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..500 {
            let cmd = WheelCommand::new(
                [
                    rng.gen_range(-FRAC_PI_2..FRAC_PI_2),
                    rng.gen_range(-FRAC_PI_2..FRAC_PI_2),
                    rng.gen_range(-FRAC_PI_2..FRAC_PI_2),
                    rng.gen_range(-FRAC_PI_2..FRAC_PI_2),
                ],
                [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ],
            );
            let (oracle_twist, oracle_res) = least_squares_oracle(&cmd, &g);
            let t = forward_kinematics(&cmd, &g);
            assert!((t.vx - oracle_twist.vx).abs() < 1e-10);
            assert!((t.vy - oracle_twist.vy).abs() < 1e-10);
            assert!((t.wz - oracle_twist.wz).abs() < 1e-10);
            assert!((slip_residual(&cmd, &g) - oracle_res).abs() < 1e-10);
        }
    }

    fn sample_feasible_twist(mode: MotionMode, g: &RobotGeometry, rng: &mut ChaCha8Rng) -> BodyTwist {
        match mode {
            MotionMode::Steering => {
                let vx = rng.gen_range(0.05..0.75) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                // Keep |vx / wz| >= r_min.
                let wz_max = (vx / g.r_min()).abs().min(0.32);
                let wz = rng.gen_range(-wz_max..wz_max);
                BodyTwist::new(vx, 0.0, wz)
            }
            MotionMode::Oblique => {
                let vx = rng.gen_range(0.05..0.75) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let vy_max = (vx * g.delta_lim.tan()).abs().min(0.35);
                let vy = rng.gen_range(-vy_max..vy_max);
                BodyTwist::new(vx, vy, 0.0)
            }
            MotionMode::Lateral => BodyTwist::new(0.0, rng.gen_range(-0.35..0.35), 0.0),
            MotionMode::Rotation => BodyTwist::new(0.0, 0.0, rng.gen_range(-0.32..0.32)),
        }
    }

    #[test]
    fn round_trip_recovers_representable_components() {
        let g = geo();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for mode in MotionMode::ALL {
            for _ in 0..1000 {
                let twist = sample_feasible_twist(mode, &g, &mut rng);
                let cmd = inverse_kinematics(&twist, mode, &g).unwrap();
                let back = forward_kinematics(&cmd, &g);
                let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-3);
                match mode {
                    MotionMode::Steering => {
                        assert!(rel(back.vx, twist.vx) < 1e-9);
                        assert!(rel(back.wz, twist.wz) < 1e-9);
                        assert!(back.vy.abs() < 1e-9);
                    }
                    MotionMode::Oblique => {
                        assert!(rel(back.vx, twist.vx) < 1e-9);
                        assert!(rel(back.vy, twist.vy) < 1e-9);
                        assert!(back.wz.abs() < 1e-9);
                    }
                    MotionMode::Lateral => {
                        assert!(rel(back.vy, twist.vy) < 1e-9);
                        assert!(back.vx.abs() < 1e-9);
                        assert!(back.wz.abs() < 1e-9);
                    }
                    MotionMode::Rotation => {
                        assert!(rel(back.wz, twist.wz) < 1e-9);
                        assert!(back.vx.abs() < 1e-9);
                        assert!(back.vy.abs() < 1e-9);
                    }
                }
                assert!(slip_residual(&cmd, &g) <= 1e-9);
            }
        }
    }

    #[test]
    fn steering_continuity_as_wz_vanishes() {
        let g = geo();
        for wz in [1e-3, 1e-6, 1e-9] {
            let cmd =
                inverse_kinematics(&BodyTwist::new(0.5, 0.0, wz), MotionMode::Steering, &g)
                    .unwrap();
            for i in 0..4 {
                assert!(cmd.delta[i].abs() < 2.5e-3, "wz={wz}: delta {}", cmd.delta[i]);
                assert!((cmd.speed[i] - 0.5).abs() < 2.5e-3);
            }
        }
    }

    #[test]
    fn steering_ignores_lateral_velocity() {
        let g = geo();
        let with_vy =
            inverse_kinematics(&BodyTwist::new(0.5, 0.2, 0.1), MotionMode::Steering, &g).unwrap();
        let without =
            inverse_kinematics(&BodyTwist::new(0.5, 0.0, 0.1), MotionMode::Steering, &g).unwrap();
        assert_eq!(with_vy, without);
    }

    #[test]
    fn infeasible_twists_are_rejected() {
        let g = geo();
        // Steering below the minimum radius.
        assert!(matches!(
            inverse_kinematics(&BodyTwist::new(0.1, 0.0, 0.3), MotionMode::Steering, &g),
            Err(KinematicsError::InfeasibleTwist { .. })
        ));
        // Oblique with yaw.
        assert!(inverse_kinematics(&BodyTwist::new(0.5, 0.1, 0.2), MotionMode::Oblique, &g)
            .is_err());
        // Oblique past the steering limit.
        assert!(inverse_kinematics(&BodyTwist::new(0.1, 0.3, 0.0), MotionMode::Oblique, &g)
            .is_err());
        // Lateral with forward speed.
        assert!(inverse_kinematics(&BodyTwist::new(0.2, 0.3, 0.0), MotionMode::Lateral, &g)
            .is_err());
        // Rotation with translation.
        assert!(inverse_kinematics(&BodyTwist::new(0.2, 0.0, 0.3), MotionMode::Rotation, &g)
            .is_err());
    }

    #[test]
    fn twist_clamping_respects_limits() {
        let g = geo();
        let t = BodyTwist::new(2.0, -1.0, 0.9).clamped(&g);
        assert_eq!(t.vx, 0.75);
        assert_eq!(t.vy, -0.35);
        assert_eq!(t.wz, 0.32);
    }

    #[test]
    fn works_in_single_precision() {
        let g: RobotGeometry<f32> = RobotGeometry::default();
        let cmd = inverse_kinematics(
            &BodyTwist::<f32>::new(0.5, 0.0, 0.1),
            MotionMode::Steering,
            &g,
        )
        .unwrap();
        let back = forward_kinematics(&cmd, &g);
        assert!((back.vx - 0.5).abs() < 1e-5);
        assert!((back.wz - 0.1).abs() < 1e-5);
    }
}
