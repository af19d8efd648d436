//! Trajectory logs: one CSV row per control step.
//!
//! Header: `t,x,y,theta,vx,vy,wz,mode,slip,reward,r_prog,r_safe,r_stab`.
//! Row zero carries the initial pose with zero velocities and reward. The
//! terminal outcome is recorded as a `# outcome: ...` trailer comment so
//! external logs without one can still be ingested (their outcome is then
//! inferred from the final goal distance).

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::kinematics::MotionMode;

pub const TRAJECTORY_HEADER: &str = "t,x,y,theta,vx,vy,wz,mode,slip,reward,r_prog,r_safe,r_stab";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Collision,
    Timeout,
}

impl Outcome {
    pub fn label(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Collision => "collision",
            Outcome::Timeout => "timeout",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "success" => Some(Outcome::Success),
            "collision" => Some(Outcome::Collision),
            "timeout" => Some(Outcome::Timeout),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub vx: f64,
    pub vy: f64,
    pub wz: f64,
    pub mode: Option<MotionMode>,
    pub slip: f64,
    pub reward: f64,
    pub r_prog: f64,
    pub r_safe: f64,
    pub r_stab: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub rows: Vec<TrajectoryRow>,
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("malformed trajectory log: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl TrajectoryLog {
    pub fn new() -> Self {
        Self {
            rows: Vec::new(),
            outcome: None,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.x,
                r.y,
                r.theta,
                r.vx,
                r.vy,
                r.wz,
                r.mode.map_or("NA", |m| m.code()),
                r.slip,
                r.reward,
                r.r_prog,
                r.r_safe,
                r.r_stab
            )?;
        }
        if let Some(outcome) = self.outcome {
            writeln!(w, "# outcome: {}", outcome.label())?;
        }
        Ok(())
    }

    pub fn read_csv<Rd: BufRead>(r: Rd) -> Result<Self, LogError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| LogError::Malformed("empty file".into()))??;
        if header.trim() != TRAJECTORY_HEADER {
            return Err(LogError::Malformed(format!(
                "unexpected header {header:?}"
            )));
        }
        let mut log = TrajectoryLog::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(label) = rest.trim().strip_prefix("outcome:") {
                    log.outcome = Outcome::from_label(label.trim());
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 13 {
                return Err(LogError::Malformed(format!(
                    "row {}: expected 13 fields, got {}",
                    n + 2,
                    fields.len()
                )));
            }
            let num = |i: usize| -> Result<f64, LogError> {
                fields[i].parse().map_err(|_| {
                    LogError::Malformed(format!("row {}: bad number {:?}", n + 2, fields[i]))
                })
            };
            log.rows.push(TrajectoryRow {
                t: num(0)?,
                x: num(1)?,
                y: num(2)?,
                theta: num(3)?,
                vx: num(4)?,
                vy: num(5)?,
                wz: num(6)?,
                mode: MotionMode::from_code(fields[7]),
                slip: num(8)?,
                reward: num(9)?,
                r_prog: num(10)?,
                r_safe: num(11)?,
                r_stab: num(12)?,
            });
        }
        if log.rows.is_empty() {
            return Err(LogError::Malformed("no data rows".into()));
        }
        Ok(log)
    }

    pub fn save(&self, path: &std::path::Path) -> io::Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, LogError> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(io::BufReader::new(file))
    }

    /// Total planar path length over the recorded poses.
    pub fn path_length(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt())
            .sum()
    }
}

impl Default for TrajectoryLog {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row(t: f64) -> TrajectoryRow {
        TrajectoryRow {
            t,
            x: t * 0.5,
            y: 0.0,
            theta: 0.1,
            vx: 0.5,
            vy: 0.0,
            wz: 0.0,
            mode: Some(MotionMode::Steering),
            slip: 0.0,
            reward: 0.05,
            r_prog: 0.05,
            r_safe: 0.0,
            r_stab: 0.0,
        }
    }

    #[test]
    fn round_trips_through_csv() {
        let log = TrajectoryLog {
            rows: (0..5).map(|i| sample_row(i as f64 * 0.1)).collect(),
            outcome: Some(Outcome::Success),
        };
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let back = TrajectoryLog::read_csv(buf.as_slice()).unwrap();
        assert_eq!(log, back);
    }

    #[test]
    fn rejects_bad_header() {
        let text = "a,b,c\n1,2,3\n";
        assert!(matches!(
            TrajectoryLog::read_csv(text.as_bytes()),
            Err(LogError::Malformed(_))
        ));
    }

    #[test]
    fn rejects_short_rows() {
        let text = format!("{TRAJECTORY_HEADER}\n0,1,2\n");
        assert!(TrajectoryLog::read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn path_length_sums_segments() {
        let log = TrajectoryLog {
            rows: (0..=10).map(|i| sample_row(i as f64 * 0.1)).collect(),
            outcome: None,
        };
        assert!((log.path_length() - 0.5).abs() < 1e-12);
    }
}
