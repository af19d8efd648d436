//! Two-stage Mamdani fuzzy mode selection and the low-level controller
//! built on it.
//!
//! A body twist is condensed into three crisp variables (turning radius,
//! velocity offset angle, energy ratio), fuzzified against piecewise-linear
//! membership families, pushed through a two-level max-min rule base, and
//! defuzzified by mean-of-maximum into one of the four motion modes. The
//! controller then projects the twist into the winning mode's feasible set
//! and dispatches to that mode's inverse kinematics, with hysteresis and a
//! steering slew limiter smoothing mode transitions.

pub mod membership;

pub use membership::{fuzzify, MembershipError, MembershipFn};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{
    inverse_kinematics, BodyTwist, KinematicsError, MotionMode, RobotGeometry, WheelCommand,
    OMEGA_EPS, VEL_EPS,
};
use crate::num::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FuzzyError {
    /// No rule fired: every output membership is zero.
    #[error("fuzzy inference undefined: all mode memberships are zero")]
    InferenceUndefined,
    #[error(transparent)]
    Membership(#[from] MembershipError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Crisp values of the three fuzzy input variables. Division by a vanishing
/// yaw rate is represented by an infinite sentinel rather than a huge float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinguisticInputs<R: Real = f64> {
    /// Path curvature radius `vx / wz` (m); `+inf` when `|wz|` vanishes.
    pub r_turn: R,
    /// Velocity offset angle `arctan(vy / vx)` (rad), in `[-pi/2, pi/2]`.
    pub a_offset: R,
    /// Lateral-to-rotational balance `vy / wz` (m); `+inf` when `|wz|`
    /// vanishes with nonzero `vy`, zero when both vanish.
    pub e_ratio: R,
}

/// Compute the crisp inputs for a twist, applying the sentinel conventions.
pub fn linguistic_inputs<R: Real>(twist: &BodyTwist<R>) -> LinguisticInputs<R> {
    let omega_eps = R::scalar(OMEGA_EPS);
    let vel_eps = R::scalar(VEL_EPS);
    let r_turn = if twist.wz.abs() < omega_eps {
        R::infinity()
    } else {
        twist.vx / twist.wz
    };
    let a_offset = if twist.vx.abs() < vel_eps {
        if twist.vy.abs() < vel_eps {
            // Pure rotation (or rest): treat the velocity vector as forward.
            R::zero()
        } else {
            R::scalar(std::f64::consts::FRAC_PI_2) * twist.vy.signum()
        }
    } else {
        (twist.vy / twist.vx).atan()
    };
    let e_ratio = if twist.wz.abs() < omega_eps {
        if twist.vy.abs() < vel_eps {
            R::zero()
        } else {
            R::infinity()
        }
    } else {
        twist.vy / twist.wz
    };
    LinguisticInputs {
        r_turn,
        a_offset,
        e_ratio,
    }
}

/// Subset indices of the turning-radius family.
pub const R_SUBSETS: [&str; 3] = ["RU", "RR", "RI"];
/// Subset indices of the offset-angle family.
pub const A_SUBSETS: [&str; 4] = ["AZ", "AR", "AU", "AL"];
/// Subset indices of the energy-ratio family.
pub const E_SUBSETS: [&str; 2] = ["RL", "TL"];

/// Membership families for the three input variables. Fuzzification feeds
/// absolute values into them; the sign is reattached by the inverse
/// kinematics of the selected mode.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipFamilies<R: Real = f64> {
    /// `|R_turn|` subsets, order `(RU, RR, RI)`, meters.
    pub r_turn: [MembershipFn<R>; 3],
    /// `|A_offset|` subsets, order `(AZ, AR, AU, AL)`, degrees.
    pub a_offset: [MembershipFn<R>; 4],
    /// `|E_ratio|` subsets, order `(RL, TL)`, meters.
    pub e_ratio: [MembershipFn<R>; 2],
}

impl<R: Real> MembershipFamilies<R> {
    /// Default breakpoints, scale-free in the robot's own geometry:
    /// radius subsets scale with the minimum turning radius, energy
    /// subsets with the spin radius, and angle subsets with the steering
    /// limit (in degrees).
    pub fn from_geometry(geo: &RobotGeometry<R>) -> Self {
        let rm = geo.r_min();
        let rs = geo.r_spin();
        let dl = geo.delta_lim.as_f64().to_degrees();
        let s = R::scalar;
        let inf = R::infinity();
        let rm6 = rm * s(0.6);
        let rm3 = rm * s(3.0);
        let rm6x = rm * s(6.0);
        Self {
            r_turn: [
                MembershipFn::Trapezoid {
                    a: R::zero(),
                    b: R::zero(),
                    c: rm6,
                    d: rm,
                },
                MembershipFn::Triangle {
                    a: rm6,
                    b: rm3,
                    c: rm6x,
                },
                MembershipFn::Trapezoid {
                    a: rm3,
                    b: rm6x,
                    c: inf,
                    d: inf,
                },
            ],
            a_offset: [
                MembershipFn::Triangle {
                    a: R::zero(),
                    b: R::zero(),
                    c: s(10.0),
                },
                MembershipFn::Trapezoid {
                    a: s(5.0),
                    b: s(15.0),
                    c: s(dl - 5.0),
                    d: s(dl),
                },
                MembershipFn::Trapezoid {
                    a: s(dl - 5.0),
                    b: s(dl + 5.0),
                    c: s(80.0),
                    d: s(85.0),
                },
                MembershipFn::Trapezoid {
                    a: s(78.0),
                    b: s(86.0),
                    c: s(90.0),
                    d: s(90.0),
                },
            ],
            e_ratio: [
                MembershipFn::Trapezoid {
                    a: R::zero(),
                    b: R::zero(),
                    c: rs * s(0.5),
                    d: rs * s(1.5),
                },
                MembershipFn::Trapezoid {
                    a: rs * s(0.5),
                    b: rs * s(1.5),
                    c: inf,
                    d: inf,
                },
            ],
        }
    }
}

/// The two rule tables. Level 1 maps `(R, A)` cells to a provisional mode;
/// level 2 refines the provisional mode against the energy ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzyRuleTables {
    /// Indexed `[r][a]` with `r` in `(RU, RR, RI)` and `a` in
    /// `(AZ, AR, AU, AL)`.
    pub level1: [[MotionMode; 4]; 3],
    /// Indexed `[mode][e]` with `mode` in `(SM, OM, LM, RM)` and `e` in
    /// `(RL, TL)`.
    pub level2: [[MotionMode; 2]; 4],
}

impl Default for FuzzyRuleTables {
    fn default() -> Self {
        use MotionMode::{Lateral as LM, Oblique as OM, Rotation as RM, Steering as SM};
        Self {
            level1: [
                [RM, SM, SM, RM], // RU
                [SM, SM, SM, SM], // RR
                [SM, OM, OM, LM], // RI
            ],
            level2: [
                [SM, OM], // from SM
                [OM, OM], // from OM
                [SM, LM], // from LM
                [RM, LM], // from RM
            ],
        }
    }
}

/// First-level max-min aggregation: each `(R, A)` cell clips its output
/// mode at `min(mu_R, mu_A)`, cells are combined by max.
pub fn infer_level1<R: Real>(
    mu_r: &[R; 3],
    mu_a: &[R; 4],
    tables: &FuzzyRuleTables,
) -> [R; 4] {
    let mut out = [R::zero(); 4];
    for (i, &mr) in mu_r.iter().enumerate() {
        for (j, &ma) in mu_a.iter().enumerate() {
            let w = mr.min(ma);
            let m = tables.level1[i][j].index();
            out[m] = out[m].max(w);
        }
    }
    out
}

/// Second-level aggregation over `(provisional mode, E)` cells.
pub fn infer_level2<R: Real>(
    mu_m1: &[R; 4],
    mu_e: &[R; 2],
    tables: &FuzzyRuleTables,
) -> [R; 4] {
    let mut out = [R::zero(); 4];
    for (n, &mm) in mu_m1.iter().enumerate() {
        for (m, &me) in mu_e.iter().enumerate() {
            let w = mm.min(me);
            let k = tables.level2[n][m].index();
            out[k] = out[k].max(w);
        }
    }
    out
}

/// Full inference: fuzzify the three crisp inputs and run both levels.
/// Returns the membership degree of each motion mode, order
/// `(SM, OM, LM, RM)`.
pub fn infer_mode<R: Real>(
    inputs: &LinguisticInputs<R>,
    families: &MembershipFamilies<R>,
    tables: &FuzzyRuleTables,
) -> Result<[R; 4], FuzzyError> {
    let mu_r: [R; 3] = std::array::from_fn(|i| families.r_turn[i].eval(inputs.r_turn.abs()));
    let a_deg = R::scalar(inputs.a_offset.as_f64().abs().to_degrees());
    let mu_a: [R; 4] = std::array::from_fn(|i| families.a_offset[i].eval(a_deg));
    let mu_e: [R; 2] = std::array::from_fn(|i| families.e_ratio[i].eval(inputs.e_ratio.abs()));
    let mu_m1 = infer_level1(&mu_r, &mu_a, tables);
    let out = infer_level2(&mu_m1, &mu_e, tables);
    if out.iter().all(|d| *d == R::zero()) {
        Err(FuzzyError::InferenceUndefined)
    } else {
        Ok(out)
    }
}

/// Mean-of-maximum defuzzification: the argmax mode, with ties broken in
/// favor of the controller's current mode and then by the fixed order
/// `SM > OM > LM > RM`.
pub fn defuzzify_mom<R: Real>(
    degrees: &[R; 4],
    current: MotionMode,
) -> Result<MotionMode, FuzzyError> {
    let max = degrees.iter().cloned().fold(R::zero(), R::max);
    if max == R::zero() {
        return Err(FuzzyError::InferenceUndefined);
    }
    if degrees[current.index()] == max {
        return Ok(current);
    }
    for mode in MotionMode::ALL {
        if degrees[mode.index()] == max {
            return Ok(mode);
        }
    }
    unreachable!("max was taken over the same array")
}

/// Project a twist into the feasible set of a mode.
///
/// Steering keeps `(vx, wz)` and drops `vy`, shrinking `wz` when the
/// implied radius falls under the minimum; oblique keeps the planar speed
/// and clamps the direction to the steering limit; lateral and rotation
/// keep only their single component.
pub fn project_into_mode<R: Real>(
    twist: &BodyTwist<R>,
    mode: MotionMode,
    geo: &RobotGeometry<R>,
) -> BodyTwist<R> {
    let omega_eps = R::scalar(OMEGA_EPS);
    let vel_eps = R::scalar(VEL_EPS);
    match mode {
        MotionMode::Steering => {
            let mut wz = twist.wz;
            if wz.abs() >= omega_eps && (twist.vx / wz).abs() < geo.r_min() {
                wz = wz.signum() * twist.vx.abs() / geo.r_min();
            }
            BodyTwist::new(twist.vx, R::zero(), wz)
        }
        MotionMode::Oblique => {
            if twist.vx.abs() < vel_eps {
                return BodyTwist::zero();
            }
            let alpha = (twist.vy / twist.vx).atan();
            let clamped = alpha.max(-geo.delta_lim).min(geo.delta_lim);
            let speed = twist.speed();
            let sign = twist.vx.signum();
            BodyTwist::new(sign * speed * clamped.cos(), sign * speed * clamped.sin(), R::zero())
        }
        MotionMode::Lateral => BodyTwist::new(R::zero(), twist.vy, R::zero()),
        MotionMode::Rotation => BodyTwist::new(R::zero(), R::zero(), twist.wz),
    }
}

/// Mutable per-loop state of the controller: the active mode, the
/// transition counter, and the last emitted command (the slew reference).
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState<R: Real = f64> {
    pub current_mode: MotionMode,
    pub pending_mode: Option<MotionMode>,
    pub hold_counter: u32,
    pub last_command: WheelCommand<R>,
}

impl<R: Real> Default for ControllerState<R> {
    fn default() -> Self {
        Self {
            current_mode: MotionMode::Steering,
            pending_mode: None,
            hold_counter: 0,
            last_command: WheelCommand::stopped(),
        }
    }
}

/// The low-level controller: fuzzy mode selection plus mode-constrained
/// inverse kinematics, with hysteresis and steering slew limiting.
#[derive(Debug, Clone)]
pub struct FuzzyController<R: Real = f64> {
    pub geo: RobotGeometry<R>,
    pub families: MembershipFamilies<R>,
    pub tables: FuzzyRuleTables,
    /// Consecutive wins a new mode needs before the controller switches.
    pub hold_steps: u32,
    /// Steering slew-rate limit (rad/s).
    pub slew_max: R,
    /// Control period (s).
    pub dt: R,
}

impl<R: Real> FuzzyController<R> {
    pub fn new(geo: RobotGeometry<R>) -> Self {
        Self {
            families: MembershipFamilies::from_geometry(&geo),
            tables: FuzzyRuleTables::default(),
            hold_steps: 3,
            slew_max: R::scalar(std::f64::consts::FRAC_PI_2),
            dt: R::scalar(0.1),
            geo,
        }
    }

    /// Run one control cycle: select a mode for `twist`, emit the wheel
    /// command realizing the mode-projected twist, and update `state`.
    ///
    /// While the slew limiter is still dragging steering angles toward a
    /// new target, wheel speeds are held at zero; misaligned wheels are
    /// never driven, so every emitted command stays slip-free.
    pub fn control_step(
        &self,
        twist: &BodyTwist<R>,
        state: &mut ControllerState<R>,
    ) -> Result<(WheelCommand<R>, MotionMode), FuzzyError> {
        let twist = twist.clamped(&self.geo);
        let inputs = linguistic_inputs(&twist);
        let degrees = infer_mode(&inputs, &self.families, &self.tables)?;
        let raw = defuzzify_mom(&degrees, state.current_mode)?;

        if raw == state.current_mode {
            state.pending_mode = None;
            state.hold_counter = 0;
        } else {
            if state.pending_mode == Some(raw) {
                state.hold_counter += 1;
            } else {
                state.pending_mode = Some(raw);
                state.hold_counter = 1;
            }
            if state.hold_counter >= self.hold_steps {
                state.current_mode = raw;
                state.pending_mode = None;
                state.hold_counter = 0;
            }
        }
        let mode = state.current_mode;

        let projected = project_into_mode(&twist, mode, &self.geo);
        let target = inverse_kinematics(&projected, mode, &self.geo)?;

        let max_step = self.slew_max * self.dt;
        let mut delta = [R::zero(); 4];
        let mut settled = true;
        for i in 0..4 {
            let prev = state.last_command.delta[i];
            let diff = target.delta[i] - prev;
            let limited = diff.max(-max_step).min(max_step);
            delta[i] = prev + limited;
            if (target.delta[i] - delta[i]).abs() > R::scalar(1e-9) {
                settled = false;
            }
        }
        let speed = if settled { target.speed } else { [R::zero(); 4] };
        let cmd = WheelCommand::new(delta, speed);
        state.last_command = cmd;
        Ok((cmd, mode))
    }
}
