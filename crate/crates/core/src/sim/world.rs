//! World geometry and scenario files.
//!
//! A scenario is the JSON description of a world: bounds, static obstacles,
//! a start pose and a goal, plus optional randomization ranges for episodic
//! start/goal sampling. Worlds are the resolved per-episode geometry.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::kinematics::Pose2D;
use crate::num::Real;

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<R: Real = f64> {
    pub min: (R, R),
    pub max: (R, R),
}

impl<R: Real> Rect<R> {
    pub fn contains(&self, p: (R, R)) -> bool {
        p.0 >= self.min.0 && p.0 <= self.max.0 && p.1 >= self.min.1 && p.1 <= self.max.1
    }

    /// Distance from an interior point to the nearest edge; negative if
    /// the point lies outside.
    pub fn interior_clearance(&self, p: (R, R)) -> R {
        let dx = (p.0 - self.min.0).min(self.max.0 - p.0);
        let dy = (p.1 - self.min.1).min(self.max.1 - p.1);
        dx.min(dy)
    }

    /// Distance from a point to this rectangle's boundary or interior
    /// (zero inside).
    pub fn distance(&self, p: (R, R)) -> R {
        let cx = p.0.max(self.min.0).min(self.max.0);
        let cy = p.1.max(self.min.1).min(self.max.1);
        let dx = p.0 - cx;
        let dy = p.1 - cy;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Static obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Obstacle<R: Real = f64> {
    Circle { center: (R, R), radius: R },
    Rect(Rect<R>),
}

impl<R: Real> Obstacle<R> {
    /// Distance from a point to the obstacle surface (zero inside).
    pub fn distance(&self, p: (R, R)) -> R {
        match *self {
            Obstacle::Circle { center, radius } => {
                let dx = p.0 - center.0;
                let dy = p.1 - center.1;
                ((dx * dx + dy * dy).sqrt() - radius).max(R::zero())
            }
            Obstacle::Rect(r) => r.distance(p),
        }
    }

    /// Nearest nonnegative ray parameter at which the ray `origin + t dir`
    /// (unit `dir`) hits the obstacle, if any.
    pub fn raycast(&self, origin: (R, R), dir: (R, R)) -> Option<R> {
        match *self {
            Obstacle::Circle { center, radius } => {
                let ox = center.0 - origin.0;
                let oy = center.1 - origin.1;
                let b = dir.0 * ox + dir.1 * oy;
                let c = ox * ox + oy * oy - radius * radius;
                if c <= R::zero() {
                    // Origin on or inside the circle.
                    return Some(R::zero());
                }
                let disc = b * b - c;
                if disc < R::zero() {
                    return None;
                }
                let t = b - disc.sqrt();
                if t >= R::zero() {
                    Some(t)
                } else {
                    None
                }
            }
            Obstacle::Rect(r) => {
                let (enter, exit) = slab_interval(origin, dir, &r);
                if enter <= exit && exit >= R::zero() {
                    Some(enter.max(R::zero()))
                } else {
                    None
                }
            }
        }
    }
}

/// Entry/exit parameters of a ray against an AABB (slab method).
fn slab_interval<R: Real>(origin: (R, R), dir: (R, R), r: &Rect<R>) -> (R, R) {
    let mut enter = R::neg_infinity();
    let mut exit = R::infinity();
    for (o, d, lo, hi) in [
        (origin.0, dir.0, r.min.0, r.max.0),
        (origin.1, dir.1, r.min.1, r.max.1),
    ] {
        if d.abs() < R::scalar(1e-12) {
            if o < lo || o > hi {
                return (R::one(), R::zero()); // empty interval
            }
        } else {
            let t1 = (lo - o) / d;
            let t2 = (hi - o) / d;
            enter = enter.max(t1.min(t2));
            exit = exit.min(t1.max(t2));
        }
    }
    (enter, exit)
}

/// Resolved per-episode geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct World<R: Real = f64> {
    pub bounds: Rect<R>,
    pub obstacles: Vec<Obstacle<R>>,
    pub start: Pose2D<R>,
    pub goal: (R, R),
}

impl<R: Real> World<R> {
    /// Distance from a point to the nearest obstacle surface or world
    /// boundary.
    pub fn min_clearance(&self, p: (R, R)) -> R {
        let mut d = self.bounds.interior_clearance(p).max(R::zero());
        for ob in &self.obstacles {
            d = d.min(ob.distance(p));
        }
        d
    }

    /// Ray distance to the nearest obstacle or boundary, capped at
    /// `max_range`.
    pub fn raycast(&self, origin: (R, R), angle: R, max_range: R) -> R {
        let dir = (angle.cos(), angle.sin());
        // Exit distance through the boundary rectangle (origin inside).
        let (_, exit) = slab_interval(origin, dir, &self.bounds);
        let mut t = exit.max(R::zero());
        for ob in &self.obstacles {
            if let Some(hit) = ob.raycast(origin, dir) {
                t = t.min(hit);
            }
        }
        t.min(max_range)
    }
}

// --- scenario files -------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    pub bounds: RectSpec,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    pub start: PoseSpec,
    pub goal: [f64; 2],
    #[serde(default)]
    pub randomize: Option<RandomizeSpec>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectSpec {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ObstacleSpec {
    Circle { center: [f64; 2], radius: f64 },
    Rect { min: [f64; 2], max: [f64; 2] },
}

/// Optional per-episode randomization. Ranges are inclusive `[lo, hi]`.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomizeSpec {
    #[serde(default)]
    pub start_x: Option<[f64; 2]>,
    #[serde(default)]
    pub start_y: Option<[f64; 2]>,
    #[serde(default)]
    pub start_theta: Option<[f64; 2]>,
    /// Goal sampled at `dist` meters and `bearing` radians relative to the
    /// start pose (bearing 0 = straight ahead).
    #[serde(default)]
    pub goal_dist: Option<[f64; 2]>,
    #[serde(default)]
    pub goal_bearing: Option<[f64; 2]>,
    /// Goal sampled inside an absolute box.
    #[serde(default)]
    pub goal_x: Option<[f64; 2]>,
    #[serde(default)]
    pub goal_y: Option<[f64; 2]>,
}

impl Scenario {
    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }

    pub fn load(path: &Path) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("{}: {e}", path.display()),
            )
        })
    }

    fn obstacles<R: Real>(&self) -> Vec<Obstacle<R>> {
        self.obstacles
            .iter()
            .map(|ob| match *ob {
                ObstacleSpec::Circle { center, radius } => Obstacle::Circle {
                    center: (R::scalar(center[0]), R::scalar(center[1])),
                    radius: R::scalar(radius),
                },
                ObstacleSpec::Rect { min, max } => Obstacle::Rect(Rect {
                    min: (R::scalar(min[0]), R::scalar(min[1])),
                    max: (R::scalar(max[0]), R::scalar(max[1])),
                }),
            })
            .collect()
    }

    /// Resolve the scenario into a world, sampling any randomized start
    /// or goal from `rng`. Sampling retries until start and goal clear
    /// all obstacles by `clearance`; fixed placements that fail are an
    /// error.
    pub fn sample_world<R: Real, G: Rng + ?Sized>(
        &self,
        clearance: R,
        rng: &mut G,
    ) -> Result<World<R>, String> {
        let bounds = Rect {
            min: (R::scalar(self.bounds.min[0]), R::scalar(self.bounds.min[1])),
            max: (R::scalar(self.bounds.max[0]), R::scalar(self.bounds.max[1])),
        };
        if bounds.min.0 >= bounds.max.0 || bounds.min.1 >= bounds.max.1 {
            return Err("bounds are empty".into());
        }
        let obstacles = self.obstacles::<R>();
        let rz = self.randomize.unwrap_or_default();
        let valid = |w: &World<R>, p: (R, R)| -> bool {
            w.bounds.contains(p) && w.min_clearance(p) > clearance
        };
        let mut world = World {
            bounds,
            obstacles,
            start: Pose2D::new(
                R::scalar(self.start.x),
                R::scalar(self.start.y),
                R::scalar(self.start.theta),
            ),
            goal: (R::scalar(self.goal[0]), R::scalar(self.goal[1])),
        };

        let start_randomized =
            rz.start_x.is_some() || rz.start_y.is_some() || rz.start_theta.is_some();
        let goal_randomized = rz.goal_dist.is_some() || rz.goal_x.is_some();

        let sample = |range: Option<[f64; 2]>, fixed: f64, rng: &mut G| -> f64 {
            match range {
                Some([lo, hi]) if hi > lo => rng.gen_range(lo..=hi),
                Some([lo, _]) => lo,
                None => fixed,
            }
        };

        const TRIES: usize = 200;
        for attempt in 0..TRIES {
            let x = sample(rz.start_x, self.start.x, rng);
            let y = sample(rz.start_y, self.start.y, rng);
            let theta = sample(rz.start_theta, self.start.theta, rng);
            world.start = Pose2D::new(R::scalar(x), R::scalar(y), R::scalar(theta));
            if valid(&world, (world.start.x, world.start.y)) {
                break;
            }
            if !start_randomized || attempt + 1 == TRIES {
                return Err(format!("start ({x:.2}, {y:.2}) violates clearance"));
            }
        }
        for attempt in 0..TRIES {
            let goal = if rz.goal_dist.is_some() || rz.goal_bearing.is_some() {
                let dist = sample(rz.goal_dist, 0.0, rng);
                let bearing = sample(rz.goal_bearing, 0.0, rng);
                let heading = world.start.theta.as_f64() + bearing;
                (
                    world.start.x + R::scalar(dist * heading.cos()),
                    world.start.y + R::scalar(dist * heading.sin()),
                )
            } else {
                (
                    R::scalar(sample(rz.goal_x, self.goal[0], rng)),
                    R::scalar(sample(rz.goal_y, self.goal[1], rng)),
                )
            };
            world.goal = goal;
            if valid(&world, goal) {
                return Ok(world);
            }
            if !goal_randomized || attempt + 1 == TRIES {
                return Err(format!(
                    "goal ({:.2}, {:.2}) violates clearance",
                    goal.0.as_f64(),
                    goal.1.as_f64()
                ));
            }
        }
        unreachable!("loop returns or errors")
    }
}
