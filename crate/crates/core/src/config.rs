//! Run configuration: a single JSON document resolving every tunable in
//! the stack, with full defaults so an empty object is a valid config.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy::{FuzzyController, FuzzyRuleTables, MembershipError, MembershipFn};
use crate::kinematics::{MotionMode, RobotGeometry};
use crate::sac::{SacConfig, TrainSetup};
use crate::sim::{RewardParams, Scenario, SimParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Membership(#[from] MembershipError),
    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Membership function description as written in config files. Open
/// trapezoid shoulders are spelled with `null`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum MfSpec {
    Triangle { a: f64, b: f64, c: f64 },
    Trapezoid {
        a: f64,
        b: f64,
        c: Option<f64>,
        d: Option<f64>,
    },
}

impl MfSpec {
    fn build(&self) -> Result<MembershipFn<f64>, MembershipError> {
        match *self {
            MfSpec::Triangle { a, b, c } => MembershipFn::triangle(a, b, c),
            MfSpec::Trapezoid { a, b, c, d } => MembershipFn::trapezoid(
                a,
                b,
                c.unwrap_or(f64::INFINITY),
                d.unwrap_or(f64::INFINITY),
            ),
        }
    }
}

/// Fuzzy controller tunables. Membership families default to the
/// geometry-scaled shapes; rule tables default to the built-in rule base.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuzzyParams {
    /// Consecutive wins required before a mode switch.
    pub hold_steps: u32,
    /// Steering slew-rate limit (rad/s).
    pub slew_max: f64,
    pub r_turn_mfs: Option<[MfSpec; 3]>,
    pub a_offset_mfs: Option<[MfSpec; 4]>,
    pub e_ratio_mfs: Option<[MfSpec; 2]>,
    pub level1_rules: Option<[[MotionMode; 4]; 3]>,
    pub level2_rules: Option<[[MotionMode; 2]; 4]>,
}

impl Default for FuzzyParams {
    fn default() -> Self {
        Self {
            hold_steps: 3,
            slew_max: std::f64::consts::FRAC_PI_2,
            r_turn_mfs: None,
            a_offset_mfs: None,
            e_ratio_mfs: None,
            level1_rules: None,
            level2_rules: None,
        }
    }
}

impl FuzzyParams {
    pub fn build_controller(
        &self,
        geo: RobotGeometry<f64>,
        dt: f64,
    ) -> Result<FuzzyController<f64>, ConfigError> {
        let mut ctrl = FuzzyController::new(geo);
        ctrl.hold_steps = self.hold_steps.max(1);
        ctrl.slew_max = self.slew_max;
        ctrl.dt = dt;
        if let Some(specs) = &self.r_turn_mfs {
            for (i, s) in specs.iter().enumerate() {
                ctrl.families.r_turn[i] = s.build()?;
            }
        }
        if let Some(specs) = &self.a_offset_mfs {
            for (i, s) in specs.iter().enumerate() {
                ctrl.families.a_offset[i] = s.build()?;
            }
        }
        if let Some(specs) = &self.e_ratio_mfs {
            for (i, s) in specs.iter().enumerate() {
                ctrl.families.e_ratio[i] = s.build()?;
            }
        }
        if let Some(t) = self.level1_rules {
            ctrl.tables.level1 = t;
        }
        if let Some(t) = self.level2_rules {
            ctrl.tables.level2 = t;
        }
        if self.slew_max <= 0.0 {
            return Err(ConfigError::Invalid("slew_max must be positive".into()));
        }
        Ok(ctrl)
    }

    /// The default rule tables, exposed for documentation dumps.
    pub fn default_tables() -> FuzzyRuleTables {
        FuzzyRuleTables::default()
    }
}

/// Full parameter set of a run; every field has a default, so `{}` is a
/// valid configuration file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    pub geometry: RobotGeometry<f64>,
    pub reward: RewardParams<f64>,
    pub sim: SimParams<f64>,
    pub fuzzy: FuzzyParams,
    pub sac: SacConfig,
}

impl RunParams {
    pub fn from_json(json: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn build_controller(&self) -> Result<FuzzyController<f64>, ConfigError> {
        self.fuzzy.build_controller(self.geometry, self.sim.dt)
    }

    pub fn build_setup(&self, scenario: Scenario) -> Result<TrainSetup, ConfigError> {
        Ok(TrainSetup {
            scenario,
            controller: self.build_controller()?,
            sim: self.sim,
            reward: self.reward,
            sac: self.sac.clone(),
        })
    }
}
