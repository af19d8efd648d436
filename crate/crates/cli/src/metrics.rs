//! Episode metrics: pose precision, average speed, path efficiency, and
//! outcome classification.

use thiserror::Error;

use wisd_core::sim::{LogError, Outcome, TrajectoryLog};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("malformed log: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeMetrics {
    /// Final Euclidean error to the goal (m).
    pub pp: f64,
    /// Traversed path length over elapsed time (m/s).
    pub avg_speed: f64,
    /// Planned optimal length over actual traversed length, percent. May
    /// exceed 100 when the executed path beats the grid-discretized plan.
    pub path_efficiency: f64,
    pub outcome: Outcome,
}

/// Compute the episode metrics from a trajectory log and the planned
/// optimal path length. Logs without an outcome trailer (externally
/// produced ones) are classified by the final goal distance against
/// `goal_tol`.
pub fn compute_metrics(
    log: &TrajectoryLog,
    planned_length: f64,
    goal: (f64, f64),
    goal_tol: f64,
) -> Result<EpisodeMetrics, MetricsError> {
    let first = log
        .rows
        .first()
        .ok_or_else(|| MetricsError::Malformed("no rows".into()))?;
    let last = log.rows.last().unwrap();
    if last.t < first.t {
        return Err(MetricsError::Malformed("time runs backward".into()));
    }
    let pp = ((last.x - goal.0).powi(2) + (last.y - goal.1).powi(2)).sqrt();
    let elapsed = last.t - first.t;
    let actual = log.path_length();
    let avg_speed = if elapsed > 0.0 { actual / elapsed } else { 0.0 };
    let path_efficiency = if actual > 1e-9 {
        planned_length / actual * 100.0
    } else {
        0.0
    };
    let outcome = log.outcome.unwrap_or(if pp <= goal_tol {
        Outcome::Success
    } else {
        Outcome::Timeout
    });
    Ok(EpisodeMetrics {
        pp,
        avg_speed,
        path_efficiency,
        outcome,
    })
}
