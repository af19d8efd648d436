use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wisd_cli::cmd;

#[derive(Parser)]
#[command(name = "wisd", version, about = "Hierarchical navigation stack for 4WISD robots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Command-line values override the
/// config file; unset values fall back to deterministic defaults (seed 0,
/// output directory `out`).
#[derive(Args)]
struct Common {
    /// RNG seed for everything stochastic in the command.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario JSON file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<cmd::Resolved> {
        cmd::resolve(
            self.config.as_deref(),
            self.seed,
            self.scenario.as_deref(),
            self.out.as_deref(),
        )
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy on a scenario; writes the training log and
    /// checkpoints into the output directory.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a checkpoint over deterministic episodes and emit the
    /// metrics report.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Policy checkpoint (`.wisd`).
        #[arg(long)]
        checkpoint: PathBuf,
        /// Number of evaluation episodes.
        #[arg(long, default_value_t = 30)]
        episodes: u32,
        /// Method label used in the report.
        #[arg(long, default_value = "proposed")]
        method: String,
        /// Planner grid resolution (m) for the path-efficiency baseline.
        #[arg(long, default_value_t = 0.1)]
        grid_res: f64,
        /// Also write one trajectory CSV per episode.
        #[arg(long)]
        save_trajectories: bool,
    },
    /// Feed a CSV of body twists through the fuzzy controller and write
    /// the wheel commands it emits.
    RunController {
        #[command(flatten)]
        common: Common,
        /// Input CSV with header `vx,vy,wz`.
        #[arg(long)]
        input: PathBuf,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Long-route navigation: A* global plan, lookahead waypoints, and the
    /// trained policy in the loop.
    Navigate {
        #[command(flatten)]
        common: Common,
        /// Policy checkpoint (`.wisd`).
        #[arg(long)]
        checkpoint: PathBuf,
        /// Waypoint lookahead distance (m).
        #[arg(long, default_value_t = 2.0)]
        lookahead: f64,
        /// Step budget for the route.
        #[arg(long, default_value_t = 3000)]
        max_steps: u32,
        /// Planner grid resolution (m).
        #[arg(long, default_value_t = 0.1)]
        grid_res: f64,
    },
    /// Summarize a trajectory log.
    Replay {
        #[command(flatten)]
        common: Common,
        /// Trajectory CSV to summarize.
        #[arg(long)]
        input: PathBuf,
        /// Optional per-step summary CSV (cumulative distance/reward).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Measure controller and policy latency against the real-time budget.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2000)]
        iterations: usize,
    },
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train { common } => cmd::run_train(&common.resolve()?),
        Command::Eval {
            common,
            checkpoint,
            episodes,
            method,
            grid_res,
            save_trajectories,
        } => cmd::run_eval(
            &common.resolve()?,
            &checkpoint,
            episodes,
            &method,
            grid_res,
            save_trajectories,
        ),
        Command::RunController {
            common,
            input,
            output,
        } => cmd::run_controller(&common.resolve()?, &input, output.as_deref()),
        Command::Navigate {
            common,
            checkpoint,
            lookahead,
            max_steps,
            grid_res,
        } => cmd::run_navigate(&common.resolve()?, &checkpoint, lookahead, max_steps, grid_res),
        Command::Replay {
            common,
            input,
            output,
        } => {
            let _ = common.resolve()?; // honor the shared flags
            cmd::run_replay(&input, output.as_deref())
        }
        Command::Bench { common, iterations } => cmd::run_bench(&common.resolve()?, iterations),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
