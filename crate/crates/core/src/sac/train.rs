//! Seeded end-to-end training and evaluation.
//!
//! The pipeline mixes precisions deliberately: the simulator and controller
//! run in `f64` (their guarantees are stated at 1e-9), the networks run in
//! `f32` (the checkpoint tensor dtype), and observations/rewards are cast
//! at the boundary.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::checkpoint::{mlp_to_tensors, Checkpoint};
use crate::fuzzy::FuzzyController;
use crate::kinematics::RobotGeometry;
use crate::neural::policy::scale_action;
use crate::sim::{
    Action, Done, Env, Observation, RewardParams, Scenario, SimError, SimParams, OBS_DIM,
};

use super::{ActionMode, ReplayBuffer, SacAgent, SacConfig, Transition};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Everything a run needs, already resolved from configuration.
#[derive(Debug, Clone)]
pub struct TrainSetup {
    pub scenario: Scenario,
    pub controller: FuzzyController<f64>,
    pub sim: SimParams<f64>,
    pub reward: RewardParams<f64>,
    pub sac: SacConfig,
}

/// One line of the per-episode training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub episode: u32,
    pub ret: f64,
    pub r_prog: f64,
    pub r_safe: f64,
    pub r_stab: f64,
    pub critic1_loss: f64,
    pub critic2_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    pub eval_sr: Option<f64>,
    pub mean_slip: f64,
}

pub const TRAINING_LOG_HEADER: &str =
    "episode,return,r_prog,r_safe,r_stab,critic1_loss,critic2_loss,actor_loss,alpha,eval_sr,mean_slip";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub rows: Vec<EpisodeRow>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRAINING_LOG_HEADER);
        out.push('\n');
        for r in &self.rows {
            let eval = r.eval_sr.map_or(String::new(), |v| format!("{v:.3}"));
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{:.3e}\n",
                r.episode,
                r.ret,
                r.r_prog,
                r.r_safe,
                r.r_stab,
                r.critic1_loss,
                r.critic2_loss,
                r.actor_loss,
                r.alpha,
                eval,
                r.mean_slip
            ));
        }
        out
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())
    }
}

/// Summary of a deterministic evaluation pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalStats {
    pub episodes: u32,
    pub successes: u32,
    pub success_rate: f64,
    pub mean_return: f64,
    pub mean_slip: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub log: TrainingLog,
    pub final_eval: EvalStats,
    pub agent: SacAgent<f32>,
    pub checkpoint: Option<PathBuf>,
}

/// Flatten an observation into the f32 network input.
pub fn obs_to_input(obs: &Observation<f64>) -> Vec<f32> {
    obs.to_vec().iter().map(|&v| v as f32).collect()
}

/// Map a normalized network action into an environment action.
pub fn normalized_to_action(mode: ActionMode, a: &[f32], geo: &RobotGeometry<f64>) -> Action<f64> {
    match mode {
        ActionMode::Twist => {
            let a64: Vec<f64> = a.iter().map(|&v| f64::from(v)).collect();
            Action::Twist(scale_action(&a64, geo))
        }
        ActionMode::Wheel => Action::Wheels(std::array::from_fn(|i| f64::from(a[i]))),
    }
}

/// Persist the agent's networks.
pub fn save_agent_checkpoint(agent: &SacAgent<f32>, path: &Path) -> std::io::Result<()> {
    let mut tensors = mlp_to_tensors("actor", &agent.actor);
    tensors.extend(mlp_to_tensors("critic1", &agent.critic1));
    tensors.extend(mlp_to_tensors("critic2", &agent.critic2));
    Checkpoint { tensors }.save(path)
}

/// Run deterministic (mean-action) episodes on held-out reset seeds.
pub fn evaluate(
    agent: &SacAgent<f32>,
    env: &mut Env<f64>,
    episodes: u32,
    seed_base: u64,
) -> Result<EvalStats, SimError> {
    let mode = agent.config.action_mode;
    let geo = *env.geometry();
    let mut successes = 0;
    let mut sum_return = 0.0;
    let mut sum_slip = 0.0;
    let mut slip_steps = 0u64;
    for e in 0..episodes {
        let mut obs = obs_to_input(&env.reset(seed_base.wrapping_add(e as u64))?);
        loop {
            let a = agent.act_mean(&obs);
            let res = env.step(&normalized_to_action(mode, &a, &geo))?;
            obs = obs_to_input(&res.observation);
            sum_return += res.reward.total;
            sum_slip += res.slip;
            slip_steps += 1;
            if res.done.is_terminal() {
                if res.done == Done::GoalReached {
                    successes += 1;
                }
                break;
            }
        }
    }
    Ok(EvalStats {
        episodes,
        successes,
        success_rate: f64::from(successes) / f64::from(episodes.max(1)),
        mean_return: sum_return / f64::from(episodes.max(1)),
        mean_slip: sum_slip / slip_steps.max(1) as f64,
    })
}

fn validate(config: &SacConfig) -> Result<(), TrainError> {
    if !(config.gamma > 0.0 && config.gamma < 1.0) {
        return Err(TrainError::InvalidConfig(format!(
            "gamma {} outside (0, 1)",
            config.gamma
        )));
    }
    if !(config.tau > 0.0 && config.tau <= 1.0) {
        return Err(TrainError::InvalidConfig(format!(
            "tau {} outside (0, 1]",
            config.tau
        )));
    }
    if config.batch_size == 0 || config.episodes == 0 || config.buffer_capacity == 0 {
        return Err(TrainError::InvalidConfig(
            "batch_size, episodes and buffer_capacity must be positive".into(),
        ));
    }
    if config.hidden.is_empty() || config.hidden.contains(&0) {
        return Err(TrainError::InvalidConfig(
            "hidden layer sizes must be nonempty and positive".into(),
        ));
    }
    Ok(())
}

/// Seeded end-to-end training: warmup with uniform random actions, then one
/// gradient update per environment step, periodic deterministic evaluation,
/// and a final held-out evaluation. Writes `train_log.csv` and checkpoints
/// into `out_dir` when given.
pub fn train(
    setup: &TrainSetup,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome, TrainError> {
    validate(&setup.sac)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let sac = setup.sac.clone();
    let act_dim = sac.action_mode.act_dim();
    let geo = setup.controller.geo;

    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let net_seed = master.gen::<u64>();
    let action_seed = master.gen::<u64>();
    let update_seed = master.gen::<u64>();
    let episode_base = master.gen::<u64>();
    let eval_base = master.gen::<u64>();

    let mut net_rng = ChaCha8Rng::seed_from_u64(net_seed);
    let mut action_rng = ChaCha8Rng::seed_from_u64(action_seed);
    let mut update_rng = ChaCha8Rng::seed_from_u64(update_seed);

    let mut agent = SacAgent::<f32>::new(OBS_DIM, act_dim, sac.clone(), &mut net_rng);
    let mut env = Env::new(
        setup.scenario.clone(),
        setup.controller.clone(),
        setup.sim,
        setup.reward,
        episode_base,
    )?;
    let mut buffer = ReplayBuffer::<f32>::new(sac.buffer_capacity);

    let mut log = TrainingLog::default();
    let mut total_steps: usize = 0;

    for episode in 0..sac.episodes {
        let mut obs = obs_to_input(&env.reset(episode_base.wrapping_add(u64::from(episode)))?);
        let mut ep_return = 0.0;
        let mut ep_prog = 0.0;
        let mut ep_safe = 0.0;
        let mut ep_stab = 0.0;
        let mut ep_slip = 0.0;
        let mut ep_steps = 0u32;
        let mut losses = (0.0f64, 0.0f64, 0.0f64);
        let mut n_updates = 0u32;

        loop {
            let a: Vec<f32> = if total_steps < sac.warmup {
                (0..act_dim)
                    .map(|_| action_rng.gen_range(-1.0f32..1.0))
                    .collect()
            } else {
                agent.act_sampled(&obs, &mut action_rng)
            };
            let res = env.step(&normalized_to_action(sac.action_mode, &a, &geo))?;
            let next = obs_to_input(&res.observation);
            // Horizon cutoffs keep bootstrapping; real terminals stop it.
            let done_flag = matches!(res.done, Done::GoalReached | Done::Collision);
            buffer.push(Transition {
                s: obs.clone().into_boxed_slice(),
                a: a.into_boxed_slice(),
                r: res.reward.total as f32,
                s_next: next.clone().into_boxed_slice(),
                done: done_flag,
            });
            obs = next;
            total_steps += 1;
            ep_return += res.reward.total;
            ep_prog += res.reward.progress;
            ep_safe += res.reward.safety;
            ep_stab += res.reward.stability;
            ep_slip += res.slip;
            ep_steps += 1;

            if total_steps >= sac.warmup && buffer.len() >= sac.batch_size {
                for _ in 0..sac.updates_per_step {
                    let batch = buffer
                        .sample(sac.batch_size, &mut update_rng)
                        .expect("buffer holds at least one batch");
                    let y = agent.critic_target(&batch, &mut update_rng);
                    let (l1, l2) = agent.critic_update(&batch, &y);
                    let la = agent.actor_update(&batch, &mut update_rng);
                    agent.soft_update();
                    losses.0 += f64::from(l1);
                    losses.1 += f64::from(l2);
                    losses.2 += f64::from(la);
                    n_updates += 1;
                }
            }
            if res.done.is_terminal() {
                break;
            }
        }

        let eval_sr = if sac.eval_every > 0 && (episode + 1) % sac.eval_every == 0 {
            Some(evaluate(&agent, &mut env, sac.eval_episodes, eval_base)?.success_rate)
        } else {
            None
        };
        let n = f64::from(n_updates.max(1));
        log.rows.push(EpisodeRow {
            episode,
            ret: ep_return,
            r_prog: ep_prog,
            r_safe: ep_safe,
            r_stab: ep_stab,
            critic1_loss: losses.0 / n,
            critic2_loss: losses.1 / n,
            actor_loss: losses.2 / n,
            alpha: f64::from(agent.alpha()),
            eval_sr,
            mean_slip: ep_slip / f64::from(ep_steps.max(1)),
        });

        if let Some(dir) = out_dir {
            if sac.checkpoint_every > 0 && (episode + 1) % sac.checkpoint_every == 0 {
                save_agent_checkpoint(&agent, &dir.join(format!("checkpoint_ep{:05}.wisd", episode + 1)))?;
            }
        }
    }

    let final_eval = evaluate(&agent, &mut env, sac.final_eval_episodes, eval_base)?;
    let mut checkpoint = None;
    if let Some(dir) = out_dir {
        log.save(&dir.join("train_log.csv"))?;
        let path = dir.join("policy.wisd");
        save_agent_checkpoint(&agent, &path)?;
        checkpoint = Some(path);
    }
    Ok(TrainOutcome {
        log,
        final_eval,
        agent,
        checkpoint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::RobotGeometry;

    fn tiny_setup(action_mode: ActionMode) -> TrainSetup {
        let scenario = Scenario::from_json(
            r#"{
                "bounds": {"min": [-10, -10], "max": [10, 10]},
                "start": {"x": 0, "y": 0, "theta": 0},
                "goal": [3, 0],
                "randomize": {"goal_dist": [2.0, 3.0], "goal_bearing": [-0.5, 0.5]}
            }"#,
        )
        .unwrap();
        TrainSetup {
            scenario,
            controller: FuzzyController::new(RobotGeometry::default()),
            sim: SimParams::default(),
            reward: RewardParams::default(),
            sac: SacConfig {
                episodes: 3,
                warmup: 40,
                batch_size: 16,
                hidden: vec![16],
                eval_every: 2,
                eval_episodes: 2,
                final_eval_episodes: 2,
                checkpoint_every: 0,
                buffer_capacity: 10_000,
                action_mode,
                ..SacConfig::default()
            },
        }
    }

    #[test]
    fn identical_seeds_produce_identical_logs() {
        let setup = tiny_setup(ActionMode::Twist);
        let a = train(&setup, 7, None).unwrap();
        let b = train(&setup, 7, None).unwrap();
        assert_eq!(a.log.to_csv(), b.log.to_csv());
        assert_eq!(a.agent.actor, b.agent.actor);
        assert_eq!(a.final_eval, b.final_eval);
    }

    #[test]
    fn different_seeds_diverge() {
        let setup = tiny_setup(ActionMode::Twist);
        let a = train(&setup, 7, None).unwrap();
        let b = train(&setup, 8, None).unwrap();
        assert_ne!(a.log.to_csv(), b.log.to_csv());
    }

    #[test]
    fn wheel_mode_trains_and_reports_slip() {
        let setup = tiny_setup(ActionMode::Wheel);
        let out = train(&setup, 3, None).unwrap();
        assert_eq!(out.log.rows.len(), 3);
        // Raw wheel actions are essentially never consistent.
        assert!(out.log.rows.iter().any(|r| r.mean_slip > 1e-6));
    }

    #[test]
    fn twist_mode_stays_slip_free() {
        let setup = tiny_setup(ActionMode::Twist);
        let out = train(&setup, 3, None).unwrap();
        assert!(out.log.rows.iter().all(|r| r.mean_slip <= 1e-9));
    }

    #[test]
    fn writes_log_and_checkpoint() {
        let dir = std::env::temp_dir().join(format!("wisd_train_test_{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        let setup = tiny_setup(ActionMode::Twist);
        let out = train(&setup, 1, Some(&dir)).unwrap();
        assert!(dir.join("train_log.csv").exists());
        let ck = out.checkpoint.expect("final checkpoint path");
        assert!(ck.exists());
        let loaded = Checkpoint::load(&ck).unwrap();
        assert!(loaded.get("actor.l0.w").is_some());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn rejects_invalid_config() {
        let mut setup = tiny_setup(ActionMode::Twist);
        setup.sac.gamma = 1.5;
        assert!(matches!(
            train(&setup, 0, None),
            Err(TrainError::InvalidConfig(_))
        ));
    }
}
