//! Subcommand implementations. `main` only parses arguments and picks the
//! exit code; everything here is library-callable for tests.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use wisd_core::checkpoint::{expect_mlp_dims, mlp_from_tensors, Checkpoint};
use wisd_core::config::{FuzzyParams, RunParams};
use wisd_core::fuzzy::ControllerState;
use wisd_core::kinematics::{BodyTwist, RobotGeometry};
use wisd_core::neural::policy::GaussianHead;
use wisd_core::neural::{Activation, Mlp};
use wisd_core::sac::train::{normalized_to_action, obs_to_input};
use wisd_core::sac::{train as sac_train, ActionMode, SacConfig};
use wisd_core::sim::{
    Done, Env, Outcome, RewardParams, Scenario, SimParams, TrajectoryLog, TrajectoryRow, OBS_DIM,
};

use crate::metrics::{compute_metrics, EpisodeMetrics};
use crate::plan::{astar_plan, path_cost, path_world, OccupancyGrid, WaypointFollower};
use crate::report::{render_csv, render_table, MetricsSummary, ReportRow};

/// Top-level configuration file: run parameters plus the file-level
/// settings (scenario path, seed, output directory). Every field has a
/// default; command-line flags override file values.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub geometry: RobotGeometry<f64>,
    pub reward: RewardParams<f64>,
    pub sim: SimParams<f64>,
    pub fuzzy: FuzzyParams,
    pub sac: SacConfig,
    pub scenario: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl CliConfig {
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", p.display()))
            }
            None => Ok(Self::default()),
        }
    }

    pub fn params(&self) -> RunParams {
        RunParams {
            geometry: self.geometry,
            reward: self.reward,
            sim: self.sim,
            fuzzy: self.fuzzy.clone(),
            sac: self.sac.clone(),
        }
    }
}

/// Flag/config/default resolution shared by all subcommands.
pub struct Resolved {
    pub config: CliConfig,
    pub seed: u64,
    pub scenario_path: Option<PathBuf>,
    pub out_dir: PathBuf,
}

pub fn resolve(
    config_path: Option<&Path>,
    seed: Option<u64>,
    scenario: Option<&Path>,
    out: Option<&Path>,
) -> Result<Resolved> {
    let config = CliConfig::load_or_default(config_path)?;
    let seed = seed.or(config.seed).unwrap_or(0);
    let scenario_path = scenario
        .map(Path::to_path_buf)
        .or_else(|| config.scenario.clone());
    let out_dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(Resolved {
        config,
        seed,
        scenario_path,
        out_dir,
    })
}

fn load_scenario(r: &Resolved) -> Result<Scenario> {
    let path = r
        .scenario_path
        .as_ref()
        .context("no scenario given: pass --scenario or set it in the config file")?;
    Scenario::load(path).with_context(|| format!("loading scenario {}", path.display()))
}

/// A deployable actor loaded from a checkpoint.
pub struct Policy {
    pub actor: Mlp<f32>,
    pub action_mode: ActionMode,
}

impl Policy {
    pub fn load(path: &Path, action_mode: ActionMode) -> Result<Self> {
        let ck = Checkpoint::load(path)
            .with_context(|| format!("loading checkpoint {}", path.display()))?;
        let actor = mlp_from_tensors("actor", &ck, Activation::Relu)?;
        expect_mlp_dims(&actor, OBS_DIM, 2 * action_mode.act_dim(), "actor")?;
        Ok(Self { actor, action_mode })
    }

    pub fn act_mean(&self, obs: &[f32]) -> Vec<f32> {
        let raw = self.actor.forward_one(obs).expect("actor forward");
        GaussianHead::from_raw(&raw).mean_action()
    }
}

fn initial_row(env: &Env<f64>) -> TrajectoryRow {
    let p = env.pose();
    TrajectoryRow {
        t: 0.0,
        x: p.x,
        y: p.y,
        theta: p.theta,
        vx: 0.0,
        vy: 0.0,
        wz: 0.0,
        mode: None,
        slip: 0.0,
        reward: 0.0,
        r_prog: 0.0,
        r_safe: 0.0,
        r_stab: 0.0,
    }
}

/// Run one deterministic episode, optionally steering the goal through a
/// waypoint follower. Returns the trajectory and the terminal status.
pub fn rollout_episode(
    env: &mut Env<f64>,
    policy: &Policy,
    mut follower: Option<&mut WaypointFollower>,
) -> Result<(TrajectoryLog, Done)> {
    let geo = *env.geometry();
    let dt = env.params().dt;
    let mut log = TrajectoryLog::new();
    log.rows.push(initial_row(env));
    loop {
        if let Some(f) = follower.as_deref_mut() {
            let p = env.pose();
            let wp = f.select((p.x, p.y));
            env.set_goal(wp);
        }
        let obs = obs_to_input(&env.observation());
        let a = policy.act_mean(&obs);
        let res = env.step(&normalized_to_action(policy.action_mode, &a, &geo))?;
        log.rows.push(TrajectoryRow {
            t: f64::from(env.steps()) * dt,
            x: res.pose.x,
            y: res.pose.y,
            theta: res.pose.theta,
            vx: res.executed.vx,
            vy: res.executed.vy,
            wz: res.executed.wz,
            mode: res.mode,
            slip: res.slip,
            reward: res.reward.total,
            r_prog: res.reward.progress,
            r_safe: res.reward.safety,
            r_stab: res.reward.stability,
        });
        if res.done.is_terminal() {
            log.outcome = res.done.outcome();
            return Ok((log, res.done));
        }
    }
}

/// Plan on the current world and return the optimal path length in meters.
fn plan_length(env: &Env<f64>, grid_res: f64) -> Result<f64> {
    let grid = OccupancyGrid::from_world(env.world(), grid_res, env.footprint());
    let p = env.pose();
    let start = grid
        .world_to_cell((p.x, p.y))
        .context("start outside the grid")?;
    let goal = grid
        .world_to_cell(env.world().goal)
        .context("goal outside the grid")?;
    let path = astar_plan(&grid, start, goal).context("global planner found no path")?;
    Ok(path_cost(&path, grid.resolution))
}

// --- subcommands -----------------------------------------------------------

pub fn run_train(r: &Resolved) -> Result<()> {
    let scenario = load_scenario(r)?;
    let setup = r.config.params().build_setup(scenario)?;
    println!(
        "training: {} episodes, {:?} action space, seed {}",
        setup.sac.episodes, setup.sac.action_mode, r.seed
    );
    let out = sac_train::train(&setup, r.seed, Some(&r.out_dir))?;
    let last = out.log.rows.last().expect("at least one episode");
    println!(
        "done: final episode return {:.3}, final eval SR {:.2} ({}/{} episodes), mean slip {:.3e}",
        last.ret,
        out.final_eval.success_rate,
        out.final_eval.successes,
        out.final_eval.episodes,
        out.final_eval.mean_slip
    );
    println!("log: {}", r.out_dir.join("train_log.csv").display());
    if let Some(ck) = out.checkpoint {
        println!("checkpoint: {}", ck.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn run_eval(
    r: &Resolved,
    checkpoint: &Path,
    episodes: u32,
    method: &str,
    grid_res: f64,
    save_trajectories: bool,
) -> Result<()> {
    if episodes == 0 {
        bail!("--episodes must be positive");
    }
    let scenario = load_scenario(r)?;
    let env_name = scenario
        .name
        .clone()
        .or_else(|| {
            r.scenario_path
                .as_ref()
                .and_then(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        })
        .unwrap_or_else(|| "scenario".into());
    let params = r.config.params();
    let policy = Policy::load(checkpoint, params.sac.action_mode)?;
    let mut env = Env::new(
        scenario,
        params.build_controller()?,
        params.sim,
        params.reward,
        r.seed,
    )?;
    std::fs::create_dir_all(&r.out_dir)?;

    let mut all = Vec::with_capacity(episodes as usize);
    for e in 0..episodes {
        env.reset(r.seed.wrapping_add(u64::from(e)))?;
        let planned = plan_length(&env, grid_res)?;
        let goal = env.world().goal;
        let (log, _) = rollout_episode(&mut env, &policy, None)?;
        if save_trajectories {
            let dir = r.out_dir.join("trajectories");
            std::fs::create_dir_all(&dir)?;
            log.save(&dir.join(format!("ep{e:03}.csv")))?;
        }
        let m = compute_metrics(&log, planned, goal, params.sim.goal_tol)?;
        all.push(m);
    }
    write_report(&r.out_dir, &env_name, method, &all)?;
    Ok(())
}

fn write_report(
    out_dir: &Path,
    env_name: &str,
    method: &str,
    episodes: &[EpisodeMetrics],
) -> Result<()> {
    let mut per_ep = String::from("episode,pp_m,as_mps,pe_pct,outcome\n");
    for (i, m) in episodes.iter().enumerate() {
        per_ep.push_str(&format!(
            "{},{:.4},{:.4},{:.2},{}\n",
            i,
            m.pp,
            m.avg_speed,
            m.path_efficiency,
            m.outcome.label()
        ));
    }
    std::fs::write(out_dir.join("episodes.csv"), per_ep)?;
    let rows = vec![ReportRow {
        env: env_name.to_string(),
        method: method.to_string(),
        summary: MetricsSummary::from_episodes(episodes),
    }];
    std::fs::write(out_dir.join("report.csv"), render_csv(&rows))?;
    let table = render_table(&rows);
    std::fs::write(out_dir.join("report.txt"), &table)?;
    print!("{table}");
    Ok(())
}

pub fn run_controller(r: &Resolved, input: &Path, output: Option<&Path>) -> Result<()> {
    let params = r.config.params();
    let controller = params.build_controller()?;
    let text = std::fs::read_to_string(input)
        .with_context(|| format!("reading twist csv {}", input.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty twist csv")?;
    if header.trim() != "vx,vy,wz" {
        bail!("twist csv must start with the header `vx,vy,wz`, got {header:?}");
    }
    let mut out = String::from("mode,delta_fl,delta_fr,delta_rl,delta_rr,v_fl,v_fr,v_rl,v_rr,slip\n");
    let mut state = ControllerState::default();
    for (n, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            bail!("twist csv row {}: expected 3 fields", n + 2);
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .with_context(|| format!("twist csv row {}: bad number {:?}", n + 2, fields[i]))
        };
        let twist = BodyTwist::new(num(0)?, num(1)?, num(2)?);
        let (cmd, mode) = controller.control_step(&twist, &mut state)?;
        let slip = wisd_core::kinematics::slip_residual(&cmd, &controller.geo);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{:.3e}\n",
            mode.code(),
            cmd.delta[0],
            cmd.delta[1],
            cmd.delta[2],
            cmd.delta[3],
            cmd.speed[0],
            cmd.speed[1],
            cmd.speed[2],
            cmd.speed[3],
            slip
        ));
    }
    match output {
        Some(p) => {
            if let Some(dir) = p.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)?;
                }
            }
            std::fs::write(p, out)?;
        }
        None => print!("{out}"),
    }
    Ok(())
}

pub fn run_navigate(
    r: &Resolved,
    checkpoint: &Path,
    lookahead: f64,
    max_steps: u32,
    grid_res: f64,
) -> Result<()> {
    let scenario = load_scenario(r)?;
    let mut params = r.config.params();
    params.sim.max_steps = max_steps;
    let policy = Policy::load(checkpoint, params.sac.action_mode)?;
    let mut env = Env::new(
        scenario,
        params.build_controller()?,
        params.sim,
        params.reward,
        r.seed,
    )?;
    let final_goal = env.world().goal;
    let grid = OccupancyGrid::from_world(env.world(), grid_res, env.footprint());
    let p = env.pose();
    let start = grid
        .world_to_cell((p.x, p.y))
        .context("start outside the grid")?;
    let goal_cell = grid
        .world_to_cell(final_goal)
        .context("goal outside the grid")?;
    let cells = astar_plan(&grid, start, goal_cell).context("global planner found no path")?;
    let planned_len = path_cost(&cells, grid.resolution);
    let mut points = path_world(&grid, &cells);
    points.push(final_goal);
    let mut follower = WaypointFollower::new(points, lookahead);

    let (log, done) = rollout_episode(&mut env, &policy, Some(&mut follower))?;
    std::fs::create_dir_all(&r.out_dir)?;
    let traj_path = r.out_dir.join("trajectory.csv");
    log.save(&traj_path)?;
    let m = compute_metrics(&log, planned_len, final_goal, params.sim.goal_tol)?;
    println!(
        "navigate: {} after {} steps; planned {:.2} m, traversed {:.2} m",
        match done {
            Done::GoalReached => "reached the goal",
            Done::Collision => "collided",
            _ => "ran out of steps",
        },
        log.rows.len() - 1,
        planned_len,
        log.path_length()
    );
    println!(
        "PP {:.3} m, AS {:.3} m/s, PE {:.1}%",
        m.pp, m.avg_speed, m.path_efficiency
    );
    println!("trajectory: {}", traj_path.display());
    Ok(())
}

pub fn run_replay(input: &Path, out: Option<&Path>) -> Result<()> {
    let log = TrajectoryLog::load(input)?;
    let n = log.rows.len();
    let duration = log.rows.last().unwrap().t - log.rows[0].t;
    let length = log.path_length();
    let total: f64 = log.rows.iter().map(|r| r.reward).sum();
    let prog: f64 = log.rows.iter().map(|r| r.r_prog).sum();
    let safe: f64 = log.rows.iter().map(|r| r.r_safe).sum();
    let stab: f64 = log.rows.iter().map(|r| r.r_stab).sum();
    let max_slip = log.rows.iter().map(|r| r.slip).fold(0.0f64, f64::max);
    println!("rows: {n} ({duration:.1} s)");
    println!("path length: {length:.3} m");
    if duration > 0.0 {
        println!("mean speed: {:.3} m/s", length / duration);
    }
    println!("reward: {total:.3} (progress {prog:.3}, safety {safe:.3}, stability {stab:.3})");
    println!("max slip residual: {max_slip:.3e}");
    let mut counts = [0usize; 4];
    let mut unmoded = 0usize;
    for r in &log.rows {
        match r.mode {
            Some(m) => counts[m.index()] += 1,
            None => unmoded += 1,
        }
    }
    println!(
        "modes: SM {} OM {} LM {} RM {} (none {})",
        counts[0], counts[1], counts[2], counts[3], unmoded
    );
    println!(
        "outcome: {}",
        log.outcome.map_or("unknown", Outcome::label)
    );
    if let Some(path) = out {
        let mut csv = String::from("t,cum_dist,cum_reward\n");
        let mut dist = 0.0;
        let mut rew = 0.0;
        for w in log.rows.windows(2) {
            dist += ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt();
            rew += w[1].reward;
            csv.push_str(&format!("{},{:.4},{:.4}\n", w[1].t, dist, rew));
        }
        std::fs::write(path, csv)?;
        println!("summary data: {}", path.display());
    }
    Ok(())
}

/// Latency targets for the soft real-time check (ms).
pub const CONTROL_STEP_BUDGET_MS: f64 = 5.0;
pub const POLICY_INFERENCE_BUDGET_MS: f64 = 15.0;

pub struct BenchResult {
    pub control_step_mean_ms: f64,
    pub control_step_std_ms: f64,
    pub policy_mean_ms: f64,
    pub policy_std_ms: f64,
}

impl BenchResult {
    pub fn within_budget(&self) -> bool {
        self.control_step_mean_ms <= CONTROL_STEP_BUDGET_MS
            && self.policy_mean_ms <= POLICY_INFERENCE_BUDGET_MS
    }
}

/// Measure mean per-call latency of the fuzzy controller and of policy
/// inference at the shipped network width.
pub fn measure_latency(config: &CliConfig, iterations: usize, seed: u64) -> Result<BenchResult> {
    let params = config.params();
    let controller = params.build_controller()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let twists: Vec<BodyTwist<f64>> = (0..iterations.max(1))
        .map(|_| {
            BodyTwist::new(
                rng.gen_range(-0.75..0.75),
                rng.gen_range(-0.35..0.35),
                rng.gen_range(-0.32..0.32),
            )
        })
        .collect();
    let mut state = ControllerState::default();
    for t in twists.iter().take(100) {
        controller.control_step(t, &mut state)?; // warmup
    }
    let mut samples_ctrl = Vec::with_capacity(twists.len());
    for t in &twists {
        let t0 = Instant::now();
        let _ = controller.control_step(t, &mut state)?;
        samples_ctrl.push(t0.elapsed().as_secs_f64() * 1e3);
    }

    let mut actor_sizes = vec![OBS_DIM];
    actor_sizes.extend(&config.sac.hidden);
    actor_sizes.push(2 * config.sac.action_mode.act_dim());
    let actor = Mlp::<f32>::init(&actor_sizes, Activation::Relu, 0.01, &mut rng);
    let obs: Vec<f32> = (0..OBS_DIM).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    for _ in 0..100 {
        let raw = actor.forward_one(&obs).unwrap();
        std::hint::black_box(GaussianHead::from_raw(&raw).mean_action());
    }
    let mut samples_pol = Vec::with_capacity(iterations.max(1));
    for _ in 0..iterations.max(1) {
        let t0 = Instant::now();
        let raw = actor.forward_one(&obs).unwrap();
        std::hint::black_box(GaussianHead::from_raw(&raw).mean_action());
        samples_pol.push(t0.elapsed().as_secs_f64() * 1e3);
    }

    let stats = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        (mean, var.sqrt())
    };
    let (cm, cs) = stats(&samples_ctrl);
    let (pm, ps) = stats(&samples_pol);
    Ok(BenchResult {
        control_step_mean_ms: cm,
        control_step_std_ms: cs,
        policy_mean_ms: pm,
        policy_std_ms: ps,
    })
}

pub fn run_bench(r: &Resolved, iterations: usize) -> Result<()> {
    let b = measure_latency(&r.config, iterations, r.seed)?;
    println!(
        "control_step: {:.4} +/- {:.4} ms (budget {CONTROL_STEP_BUDGET_MS} ms)",
        b.control_step_mean_ms, b.control_step_std_ms
    );
    println!(
        "policy inference ({:?} hidden): {:.4} +/- {:.4} ms (budget {POLICY_INFERENCE_BUDGET_MS} ms)",
        r.config.sac.hidden, b.policy_mean_ms, b.policy_std_ms
    );
    println!(
        "real-time budget: {}",
        if b.within_budget() {
            "met"
        } else {
            "exceeded (soft criterion, hardware dependent)"
        }
    );
    Ok(())
}
