//! Deterministic 2D navigation environment.
//!
//! Kinematic simulation only: commands integrate exactly, and wheel
//! slippage shows up as a measured residual rather than as motion error.
//! Episodes run at 10 Hz against a static world with a ray-cast LiDAR,
//! goal-relative observations, and the three-component behavior reward.

pub mod trajectory;
pub mod world;

pub use trajectory::{LogError, Outcome, TrajectoryLog, TrajectoryRow, TRAJECTORY_HEADER};
pub use world::{Obstacle, Rect, Scenario, World};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy::{ControllerState, FuzzyController, FuzzyError};
use crate::kinematics::{
    forward_kinematics, integrate_pose, normalize_angle, slip_residual, BodyTwist, MotionMode,
    Pose2D, RobotGeometry, WheelCommand,
};
use crate::num::Real;

/// Number of LiDAR rays in the sensor slice of the observation.
pub const LIDAR_RAYS: usize = 36;
/// Total observation dimension: rays + goal polar pair + inner triple.
pub const OBS_DIM: usize = LIDAR_RAYS + 5;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("stepped a terminated episode")]
    SteppedTerminatedEpisode,
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
}

/// Simulation constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams<R: Real = f64> {
    /// Control period (s).
    pub dt: R,
    /// Episode step cap.
    pub max_steps: u32,
    /// Goal tolerance (m).
    pub goal_tol: R,
    /// LiDAR range cap (m).
    pub lidar_max: R,
    /// LiDAR normalization length scale (m): `s = exp(-d / lidar_near)`.
    pub lidar_near: R,
    /// Extra footprint radius beyond the wheel circle (m).
    pub footprint_margin: R,
    /// Standard deviation of optional zero-mean Gaussian noise on the
    /// inner (IMU-like) observation channels; zero disables it.
    pub imu_noise_sigma: R,
}

impl<R: Real> Default for SimParams<R> {
    fn default() -> Self {
        Self {
            dt: R::scalar(0.1),
            max_steps: 100,
            goal_tol: R::scalar(0.2),
            lidar_max: R::scalar(10.0),
            lidar_near: R::scalar(2.0),
            footprint_margin: R::scalar(0.05),
            imu_noise_sigma: R::zero(),
        }
    }
}

/// Behavior reward weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams<R: Real = f64> {
    pub lambda_progress: R,
    pub lambda_safety: R,
    pub lambda_stability: R,
    /// Clearance below which the safety penalty engages (m).
    pub r_safe: R,
}

impl<R: Real> Default for RewardParams<R> {
    fn default() -> Self {
        Self {
            lambda_progress: R::scalar(0.5),
            lambda_safety: R::scalar(0.3),
            lambda_stability: R::scalar(0.5),
            r_safe: R::scalar(1.0),
        }
    }
}

/// Agent-visible state: normalized LiDAR, goal polar coordinates, and the
/// inner dynamics triple (finite-differenced accelerations plus yaw rate).
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<R: Real = f64> {
    pub sensor: [R; LIDAR_RAYS],
    pub d_goal: R,
    pub theta_goal: R,
    pub inner: (R, R, R),
}

impl<R: Real> Observation<R> {
    /// Flatten into the 41-dimensional network input.
    pub fn to_vec(&self) -> Vec<R> {
        let mut v = Vec::with_capacity(OBS_DIM);
        v.extend_from_slice(&self.sensor);
        v.push(self.d_goal);
        v.push(self.theta_goal);
        v.push(self.inner.0);
        v.push(self.inner.1);
        v.push(self.inner.2);
        v
    }
}

/// Cast the 36-ray scan: 10-degree spacing starting at the body heading,
/// distances capped at `lidar_max` and normalized by `exp(-d / lidar_near)`
/// so that closer obstacles read larger.
pub fn cast_lidar<R: Real>(
    world: &World<R>,
    pose: &Pose2D<R>,
    params: &SimParams<R>,
) -> [R; LIDAR_RAYS] {
    let step = R::scalar(std::f64::consts::TAU / LIDAR_RAYS as f64);
    std::array::from_fn(|k| {
        let angle = pose.theta + step * R::scalar(k as f64);
        let d = world.raycast((pose.x, pose.y), angle, params.lidar_max);
        (-d / params.lidar_near).exp()
    })
}

/// Assemble the observation at `pose`, finite-differencing the executed
/// body velocities for the inner channels.
pub fn observe<R: Real>(
    world: &World<R>,
    pose: &Pose2D<R>,
    prev_twist: &BodyTwist<R>,
    cur_twist: &BodyTwist<R>,
    params: &SimParams<R>,
) -> Observation<R> {
    let dx = world.goal.0 - pose.x;
    let dy = world.goal.1 - pose.y;
    Observation {
        sensor: cast_lidar(world, pose, params),
        d_goal: (dx * dx + dy * dy).sqrt(),
        theta_goal: normalize_angle(dy.atan2(dx) - pose.theta),
        inner: (
            (cur_twist.vx - prev_twist.vx) / params.dt,
            (cur_twist.vy - prev_twist.vy) / params.dt,
            cur_twist.wz,
        ),
    }
}

/// Per-step reward and its three components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardBreakdown<R: Real = f64> {
    pub total: R,
    pub progress: R,
    pub safety: R,
    pub stability: R,
}

/// Behavior reward: progress toward the goal, a penalty for intruding into
/// the safety margin (`r_obs` is the clearance left beyond the footprint),
/// and a penalty on acceleration and yaw magnitudes.
pub fn reward<R: Real>(
    d_prev: R,
    d_cur: R,
    r_obs: R,
    inner: (R, R, R),
    params: &RewardParams<R>,
) -> RewardBreakdown<R> {
    let progress = params.lambda_progress * (d_prev - d_cur);
    let safety = if r_obs < params.r_safe {
        -params.lambda_safety * (params.r_safe - r_obs)
    } else {
        R::zero()
    };
    let (ax, ay, wz) = inner;
    let stability = -params.lambda_stability * (ax * ax + ay * ay + wz.abs());
    RewardBreakdown {
        total: progress + safety + stability,
        progress,
        safety,
        stability,
    }
}

/// True iff the footprint disc intersects an obstacle or leaves the world.
pub fn check_collision<R: Real>(world: &World<R>, pose: &Pose2D<R>, footprint: R) -> bool {
    world.min_clearance((pose.x, pose.y)) <= footprint
}

/// Scale a normalized 8-dimensional wheel-level action (the ablation's
/// action space) into steering angles in `[-pi/2, pi/2]` and signed wheel
/// speeds at the wheel speed limit.
pub fn scale_wheel_action<R: Real>(action: &[R; 8], geo: &RobotGeometry<R>) -> WheelCommand<R> {
    let unit = |a: R| a.max(-R::one()).min(R::one());
    let half_pi = R::scalar(std::f64::consts::FRAC_PI_2);
    WheelCommand::new(
        std::array::from_fn(|i| unit(action[i]) * half_pi),
        std::array::from_fn(|i| unit(action[4 + i]) * geo.wheel_speed_max),
    )
}

/// Episode status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Done {
    Running,
    GoalReached,
    Collision,
    Timeout,
}

impl Done {
    pub fn is_terminal(self) -> bool {
        self != Done::Running
    }

    pub fn outcome(self) -> Option<Outcome> {
        match self {
            Done::Running => None,
            Done::GoalReached => Some(Outcome::Success),
            Done::Collision => Some(Outcome::Collision),
            Done::Timeout => Some(Outcome::Timeout),
        }
    }
}

/// Action forms accepted by [`Env::step`].
#[derive(Debug, Clone, PartialEq)]
pub enum Action<R: Real = f64> {
    /// Hierarchical mode: a body twist routed through the fuzzy controller.
    Twist(BodyTwist<R>),
    /// Ablation mode: normalized wheel-level values, four steering angles
    /// then four speeds.
    Wheels([R; 8]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult<R: Real = f64> {
    pub observation: Observation<R>,
    pub reward: RewardBreakdown<R>,
    pub done: Done,
    pub mode: Option<MotionMode>,
    pub slip: R,
    pub pose: Pose2D<R>,
    /// Body twist actually executed this step (the best-fit twist of the
    /// emitted wheel command).
    pub executed: BodyTwist<R>,
}

/// A single episodic environment instance. Single-writer; spawn one per
/// parallel rollout worker.
#[derive(Debug, Clone)]
pub struct Env<R: Real = f64> {
    scenario: Scenario,
    geo: RobotGeometry<R>,
    controller: FuzzyController<R>,
    params: SimParams<R>,
    reward_params: RewardParams<R>,
    world: World<R>,
    pose: Pose2D<R>,
    prev_twist: BodyTwist<R>,
    ctrl_state: ControllerState<R>,
    steps: u32,
    status: Done,
    last_obs: Observation<R>,
    noise_rng: ChaCha8Rng,
}

impl<R: Real> Env<R> {
    /// Build an environment and run the initial reset with `seed`.
    pub fn new(
        scenario: Scenario,
        controller: FuzzyController<R>,
        params: SimParams<R>,
        reward_params: RewardParams<R>,
        seed: u64,
    ) -> Result<Self, SimError> {
        let geo = controller.geo;
        let footprint = geo.r_spin() + params.footprint_margin;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let world = scenario
            .sample_world(footprint, &mut rng)
            .map_err(SimError::InvalidScenario)?;
        let pose = world.start;
        let zero = BodyTwist::zero();
        let last_obs = observe(&world, &pose, &zero, &zero, &params);
        Ok(Self {
            scenario,
            geo,
            controller,
            params,
            reward_params,
            world,
            pose,
            prev_twist: zero,
            ctrl_state: ControllerState::default(),
            steps: 0,
            status: Done::Running,
            last_obs,
            noise_rng: ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15),
        })
    }

    /// Restart the episode. The world (including any randomized start or
    /// goal) is a pure function of `(scenario, seed)`.
    pub fn reset(&mut self, seed: u64) -> Result<Observation<R>, SimError> {
        let footprint = self.footprint();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.world = self
            .scenario
            .sample_world(footprint, &mut rng)
            .map_err(SimError::InvalidScenario)?;
        self.pose = self.world.start;
        self.prev_twist = BodyTwist::zero();
        self.ctrl_state = ControllerState::default();
        self.steps = 0;
        self.status = Done::Running;
        self.noise_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let zero = BodyTwist::zero();
        self.last_obs = observe(&self.world, &self.pose, &zero, &zero, &self.params);
        Ok(self.last_obs.clone())
    }

    pub fn footprint(&self) -> R {
        self.geo.r_spin() + self.params.footprint_margin
    }

    pub fn pose(&self) -> Pose2D<R> {
        self.pose
    }

    pub fn world(&self) -> &World<R> {
        &self.world
    }

    pub fn status(&self) -> Done {
        self.status
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn params(&self) -> &SimParams<R> {
        &self.params
    }

    pub fn geometry(&self) -> &RobotGeometry<R> {
        &self.geo
    }

    pub fn observation(&self) -> Observation<R> {
        self.last_obs.clone()
    }

    /// Redirect the goal mid-episode (waypoint following). The cached
    /// observation's goal channels are recomputed in place.
    pub fn set_goal(&mut self, goal: (R, R)) {
        self.world.goal = goal;
        let dx = goal.0 - self.pose.x;
        let dy = goal.1 - self.pose.y;
        self.last_obs.d_goal = (dx * dx + dy * dy).sqrt();
        self.last_obs.theta_goal = normalize_angle(dy.atan2(dx) - self.pose.theta);
    }

    fn goal_distance(&self, pose: &Pose2D<R>) -> R {
        let dx = self.world.goal.0 - pose.x;
        let dy = self.world.goal.1 - pose.y;
        (dx * dx + dy * dy).sqrt()
    }

    /// Advance one control period.
    pub fn step(&mut self, action: &Action<R>) -> Result<StepResult<R>, SimError> {
        if self.status.is_terminal() {
            return Err(SimError::SteppedTerminatedEpisode);
        }
        let (executed, mode, slip) = match action {
            Action::Twist(t) => {
                let (cmd, mode) = self.controller.control_step(t, &mut self.ctrl_state)?;
                (
                    forward_kinematics(&cmd, &self.geo),
                    Some(mode),
                    slip_residual(&cmd, &self.geo),
                )
            }
            Action::Wheels(a) => {
                let cmd = scale_wheel_action(a, &self.geo);
                (
                    forward_kinematics(&cmd, &self.geo),
                    None,
                    slip_residual(&cmd, &self.geo),
                )
            }
        };
        let d_prev = self.goal_distance(&self.pose);
        self.pose = integrate_pose(&self.pose, &executed, self.params.dt);
        self.steps += 1;

        let mut obs = observe(&self.world, &self.pose, &self.prev_twist, &executed, &self.params);
        if self.params.imu_noise_sigma > R::zero() {
            let s = self.params.imu_noise_sigma;
            obs.inner.0 = obs.inner.0 + R::standard_normal(&mut self.noise_rng) * s;
            obs.inner.1 = obs.inner.1 + R::standard_normal(&mut self.noise_rng) * s;
            obs.inner.2 = obs.inner.2 + R::standard_normal(&mut self.noise_rng) * s;
        }
        let d_cur = obs.d_goal;
        let r_obs =
            (self.world.min_clearance((self.pose.x, self.pose.y)) - self.footprint()).max(R::zero());
        let rew = reward(d_prev, d_cur, r_obs, obs.inner, &self.reward_params);

        self.status = if d_cur <= self.params.goal_tol {
            Done::GoalReached
        } else if check_collision(&self.world, &self.pose, self.footprint()) {
            Done::Collision
        } else if self.steps >= self.params.max_steps {
            Done::Timeout
        } else {
            Done::Running
        };
        self.prev_twist = executed;
        self.last_obs = obs.clone();
        Ok(StepResult {
            observation: obs,
            reward: rew,
            done: self.status,
            mode,
            slip,
            pose: self.pose,
            executed,
        })
    }
}
