//! Global path planning: occupancy rasterization, 8-connected A*, and
//! lookahead waypoint selection.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use wisd_core::sim::World;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("start or goal cell is occupied or outside the grid")]
    BadEndpoint,
    #[error("no path between start and goal")]
    NoPath,
}

/// Boolean occupancy raster of a world, with obstacles inflated by the
/// robot footprint so the planner can treat the robot as a point.
#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    pub resolution: f64,
    /// World coordinates of the center of cell (0, 0).
    pub origin: (f64, f64),
    pub width: usize,
    pub height: usize,
    occupied: Vec<bool>,
}

impl OccupancyGrid {
    pub fn from_cells(width: usize, height: usize, resolution: f64, occupied: Vec<bool>) -> Self {
        assert_eq!(occupied.len(), width * height);
        Self {
            resolution,
            origin: (resolution / 2.0, resolution / 2.0),
            width,
            height,
            occupied,
        }
    }

    /// Rasterize a world at `resolution`, marking every cell whose center
    /// clears obstacles or boundary by less than `inflation`.
    pub fn from_world(world: &World<f64>, resolution: f64, inflation: f64) -> Self {
        let (min, max) = (world.bounds.min, world.bounds.max);
        let width = ((max.0 - min.0) / resolution).ceil() as usize;
        let height = ((max.1 - min.1) / resolution).ceil() as usize;
        let mut occupied = vec![false; width * height];
        for iy in 0..height {
            for ix in 0..width {
                let c = (
                    min.0 + (ix as f64 + 0.5) * resolution,
                    min.1 + (iy as f64 + 0.5) * resolution,
                );
                occupied[iy * width + ix] = world.min_clearance(c) <= inflation;
            }
        }
        Self {
            resolution,
            origin: (min.0 + resolution / 2.0, min.1 + resolution / 2.0),
            width,
            height,
            occupied,
        }
    }

    pub fn is_free(&self, cell: (usize, usize)) -> bool {
        cell.0 < self.width && cell.1 < self.height && !self.occupied[cell.1 * self.width + cell.0]
    }

    pub fn world_to_cell(&self, p: (f64, f64)) -> Option<(usize, usize)> {
        let ix = ((p.0 - self.origin.0) / self.resolution).round();
        let iy = ((p.1 - self.origin.1) / self.resolution).round();
        if ix < 0.0 || iy < 0.0 {
            return None;
        }
        let (ix, iy) = (ix as usize, iy as usize);
        (ix < self.width && iy < self.height).then_some((ix, iy))
    }

    pub fn cell_center(&self, cell: (usize, usize)) -> (f64, f64) {
        (
            self.origin.0 + cell.0 as f64 * self.resolution,
            self.origin.1 + cell.1 as f64 * self.resolution,
        )
    }
}

const NEIGHBORS: [(i64, i64); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

fn step_cost(dx: i64, dy: i64, res: f64) -> f64 {
    if dx != 0 && dy != 0 {
        res * std::f64::consts::SQRT_2
    } else {
        res
    }
}

#[derive(PartialEq)]
struct Node {
    f: f64,
    cell: (usize, usize),
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on f.
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Optimal 8-connected path with unit/sqrt(2) step costs and the Euclidean
/// heuristic. Returns the cell sequence including both endpoints.
pub fn astar_plan(
    grid: &OccupancyGrid,
    start: (usize, usize),
    goal: (usize, usize),
) -> Result<Vec<(usize, usize)>, PlanError> {
    if !grid.is_free(start) || !grid.is_free(goal) {
        return Err(PlanError::BadEndpoint);
    }
    let idx = |c: (usize, usize)| c.1 * grid.width + c.0;
    let h = |c: (usize, usize)| {
        let dx = c.0 as f64 - goal.0 as f64;
        let dy = c.1 as f64 - goal.1 as f64;
        (dx * dx + dy * dy).sqrt() * grid.resolution
    };
    let mut dist = vec![f64::INFINITY; grid.width * grid.height];
    let mut prev = vec![usize::MAX; grid.width * grid.height];
    let mut heap = BinaryHeap::new();
    dist[idx(start)] = 0.0;
    heap.push(Node {
        f: h(start),
        cell: start,
    });
    while let Some(Node { f, cell }) = heap.pop() {
        let d = dist[idx(cell)];
        if f > d + h(cell) + 1e-12 {
            continue; // stale entry
        }
        if cell == goal {
            let mut path = vec![goal];
            let mut cur = idx(goal);
            while prev[cur] != usize::MAX {
                cur = prev[cur];
                path.push((cur % grid.width, cur / grid.width));
            }
            path.reverse();
            return Ok(path);
        }
        for (dx, dy) in NEIGHBORS {
            let nx = cell.0 as i64 + dx;
            let ny = cell.1 as i64 + dy;
            if nx < 0 || ny < 0 {
                continue;
            }
            let n = (nx as usize, ny as usize);
            if !grid.is_free(n) {
                continue;
            }
            let nd = d + step_cost(dx, dy, grid.resolution);
            if nd < dist[idx(n)] {
                dist[idx(n)] = nd;
                prev[idx(n)] = idx(cell);
                heap.push(Node { f: nd + h(n), cell: n });
            }
        }
    }
    Err(PlanError::NoPath)
}

/// Cost of a cell path under the planner's step metric.
pub fn path_cost(path: &[(usize, usize)], resolution: f64) -> f64 {
    path.windows(2)
        .map(|w| {
            let dx = w[1].0 as i64 - w[0].0 as i64;
            let dy = w[1].1 as i64 - w[0].1 as i64;
            step_cost(dx, dy, resolution)
        })
        .sum()
}

/// Convert a cell path into world points.
pub fn path_world(grid: &OccupancyGrid, path: &[(usize, usize)]) -> Vec<(f64, f64)> {
    path.iter().map(|&c| grid.cell_center(c)).collect()
}

/// Arc length of a world-space polyline.
pub fn polyline_length(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt())
        .sum()
}

/// Walks a planned path, handing out the farthest path point within the
/// lookahead radius of the current pose. Progress along the path index is
/// monotone; once the final point enters the lookahead it is returned
/// directly.
#[derive(Debug, Clone)]
pub struct WaypointFollower {
    path: Vec<(f64, f64)>,
    lookahead: f64,
    index: usize,
}

impl WaypointFollower {
    pub fn new(path: Vec<(f64, f64)>, lookahead: f64) -> Self {
        assert!(!path.is_empty(), "waypoint follower needs a non-empty path");
        assert!(lookahead > 0.0);
        Self {
            path,
            lookahead,
            index: 0,
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn goal(&self) -> (f64, f64) {
        *self.path.last().unwrap()
    }

    pub fn select(&mut self, pose: (f64, f64)) -> (f64, f64) {
        let within = |p: (f64, f64)| {
            ((p.0 - pose.0).powi(2) + (p.1 - pose.1).powi(2)).sqrt() <= self.lookahead
        };
        if within(self.goal()) {
            self.index = self.path.len() - 1;
            return self.goal();
        }
        let mut best = self.index;
        for j in self.index..self.path.len() {
            if within(self.path[j]) {
                best = j;
            }
        }
        self.index = best;
        self.path[best]
    }
}
