use serde::{Deserialize, Serialize};

use super::{Environment, ACTION_NOISE_STD};
use crate::error::{Error, Result};

/// Axis-aligned wall block `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    /// Strict interior; points on a face are outside.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x0 < x && x < self.x1 && self.y0 < y && y < self.y1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MazeConfig {
    pub width: f64,
    pub height: f64,
    pub walls: Vec<Rect>,
    pub start: [f64; 2],
    pub friction: f64,
    pub dt: f64,
    pub action_noise_std: f64,
    pub grid_resolution: usize,
}

impl Default for MazeConfig {
    /// A 3 x 3 arena with one block leaving a U-shaped corridor that runs
    /// from the bottom-left start, up the right side, and back along the top.
    fn default() -> Self {
        Self {
            width: 3.0,
            height: 3.0,
            walls: vec![Rect::new(0.0, 2.0, 1.0, 2.0)],
            start: [0.5, 0.5],
            friction: 0.05,
            dt: 0.1,
            action_noise_std: ACTION_NOISE_STD,
            grid_resolution: 12,
        }
    }
}

/// Point mass with state `(x, y, vx, vy)` and acceleration actions.
#[derive(Clone, Debug, PartialEq)]
pub struct Maze {
    config: MazeConfig,
}

impl Maze {
    pub fn new(config: MazeConfig) -> Result<Self> {
        let c = &config;
        let positive = [c.width, c.height, c.dt];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!(
                "maze width, height and dt must be positive: {:?}",
                positive
            )));
        }
        if !(c.friction.is_finite() && c.friction >= 0.0) || !(c.action_noise_std >= 0.0) {
            return Err(Error::Config("maze friction and noise must be non-negative".into()));
        }
        if c.grid_resolution == 0 {
            return Err(Error::Config("grid resolution must be positive".into()));
        }
        for w in &c.walls {
            if !(w.x0 < w.x1 && w.y0 < w.y1) {
                return Err(Error::Config(format!("degenerate wall {w:?}")));
            }
        }
        let [sx, sy] = c.start;
        if !(0.0..=c.width).contains(&sx) || !(0.0..=c.height).contains(&sy) || c.walls.iter().any(|w| w.contains(sx, sy)) {
            return Err(Error::Config(format!("start {:?} is not in free space", c.start)));
        }
        Ok(Self { config })
    }

    pub fn config(&self) -> &MazeConfig {
        &self.config
    }

    pub fn in_wall(&self, x: f64, y: f64) -> bool {
        self.config.walls.iter().any(|w| w.contains(x, y))
    }

    /// Moves along x from `(x, y)` to `target`, stopping at the first wall
    /// face or arena edge. Returns the position and whether it was blocked.
    fn sweep_x(&self, x: f64, y: f64, target: f64) -> (f64, bool) {
        let mut out = target;
        let mut blocked = false;
        for w in &self.config.walls {
            if !(w.y0 < y && y < w.y1) {
                continue;
            }
            if target > x && x <= w.x0 && target > w.x0 && w.x0 < out {
                out = w.x0;
                blocked = true;
            } else if target < x && x >= w.x1 && target < w.x1 && w.x1 > out {
                out = w.x1;
                blocked = true;
            }
        }
        if out < 0.0 || out > self.config.width {
            return (out.clamp(0.0, self.config.width), true);
        }
        (out, blocked)
    }

    fn sweep_y(&self, x: f64, y: f64, target: f64) -> (f64, bool) {
        let mut out = target;
        let mut blocked = false;
        for w in &self.config.walls {
            if !(w.x0 < x && x < w.x1) {
                continue;
            }
            if target > y && y <= w.y0 && target > w.y0 && w.y0 < out {
                out = w.y0;
                blocked = true;
            } else if target < y && y >= w.y1 && target < w.y1 && w.y1 > out {
                out = w.y1;
                blocked = true;
            }
        }
        if out < 0.0 || out > self.config.height {
            return (out.clamp(0.0, self.config.height), true);
        }
        (out, blocked)
    }

    pub fn coverage_grid(&self) -> CoverageGrid {
        CoverageGrid::new(self, self.config.grid_resolution)
    }
}

impl Environment for Maze {
    fn state_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn action_bounds(&self) -> Vec<[f64; 2]> {
        vec![[-1.0, 1.0]; 2]
    }

    fn action_noise_std(&self) -> f64 {
        self.config.action_noise_std
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![self.config.start[0], self.config.start[1], 0.0, 0.0]
    }

    /// Semi-implicit Euler, `v' = v + dt (a - c v)`, `p' = p + dt v'`, with
    /// the x and y moves swept against the walls in turn. A blocked move
    /// stops on the face and zeroes that velocity component.
    fn step_clipped(&self, s: &[f64], a: &[f64]) -> Vec<f64> {
        let c = &self.config;
        let mut vx = s[2] + c.dt * (a[0] - c.friction * s[2]);
        let mut vy = s[3] + c.dt * (a[1] - c.friction * s[3]);
        let (x, bx) = self.sweep_x(s[0], s[1], s[0] + c.dt * vx);
        if bx {
            vx = 0.0;
        }
        let (y, by) = self.sweep_y(x, s[1], s[1] + c.dt * vy);
        if by {
            vy = 0.0;
        }
        vec![x, y, vx, vy]
    }
}

/// Visited-cell bookkeeping over a `G x G` grid on the arena. Only cells
/// reachable from the start cell count towards the ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageGrid {
    resolution: usize,
    cell_w: f64,
    cell_h: f64,
    reachable: Vec<bool>,
    visited: Vec<bool>,
    reachable_count: usize,
    visited_count: usize,
}

impl CoverageGrid {
    pub fn new(maze: &Maze, resolution: usize) -> Self {
        let c = maze.config();
        let g = resolution;
        let cell_w = c.width / g as f64;
        let cell_h = c.height / g as f64;
        let open: Vec<bool> = (0..g * g)
            .map(|i| {
                let (col, row) = (i % g, i / g);
                !maze.in_wall((col as f64 + 0.5) * cell_w, (row as f64 + 0.5) * cell_h)
            })
            .collect();
        let mut reachable = vec![false; g * g];
        let start = ((c.start[1] / cell_h) as usize).min(g - 1) * g + ((c.start[0] / cell_w) as usize).min(g - 1);
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            if reachable[i] || !open[i] {
                continue;
            }
            reachable[i] = true;
            let (col, row) = (i % g, i / g);
            if col > 0 {
                stack.push(i - 1);
            }
            if col + 1 < g {
                stack.push(i + 1);
            }
            if row > 0 {
                stack.push(i - g);
            }
            if row + 1 < g {
                stack.push(i + g);
            }
        }
        let reachable_count = reachable.iter().filter(|r| **r).count();
        Self {
            resolution,
            cell_w,
            cell_h,
            reachable,
            visited: vec![false; g * g],
            reachable_count,
            visited_count: 0,
        }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn reachable_count(&self) -> usize {
        self.reachable_count
    }

    pub fn visited_count(&self) -> usize {
        self.visited_count
    }

    pub fn is_reachable(&self, col: usize, row: usize) -> bool {
        self.reachable[row * self.resolution + col]
    }

    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        ((col as f64 + 0.5) * self.cell_w, (row as f64 + 0.5) * self.cell_h)
    }

    /// Candidate indices along one axis: the containing cell, plus the
    /// lower neighbour when the coordinate sits exactly on a cell boundary.
    fn axis_cells(v: f64, size: f64, g: usize) -> [Option<usize>; 2] {
        let u = (v / size).max(0.0);
        let i = (u as usize).min(g - 1);
        let lower = (u.fract() == 0.0 && i > 0 && u > 0.0).then(|| i - 1);
        [Some(i), lower]
    }

    /// The reachable cell containing `(x, y)`. A point on a wall face maps
    /// to the free cell on its side of the face.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let g = self.resolution;
        for row in Self::axis_cells(y, self.cell_h, g).into_iter().flatten() {
            for col in Self::axis_cells(x, self.cell_w, g).into_iter().flatten() {
                if self.reachable[row * g + col] {
                    return Some((col, row));
                }
            }
        }
        None
    }

    /// Marks the cells of each state's `(x, y)` and returns the ratio.
    pub fn update<'a>(&mut self, states: impl IntoIterator<Item = &'a [f64]>) -> f64 {
        for s in states {
            if let Some((col, row)) = self.cell_of(s[0], s[1]) {
                let i = row * self.resolution + col;
                if !self.visited[i] {
                    self.visited[i] = true;
                    self.visited_count += 1;
                }
            }
        }
        self.ratio()
    }

    pub fn ratio(&self) -> f64 {
        self.visited_count as f64 / self.reachable_count as f64
    }
}

/// Domain A is the standard maze. Domain B triples the friction and adds a
/// thin wall across the outer half of the right-hand corridor.
pub fn make_transfer_pair() -> (Maze, Maze) {
    let a = MazeConfig::default();
    let mut b = a.clone();
    b.friction = 0.15;
    b.walls.push(Rect::new(2.5, 3.0, 1.4, 1.6));
    (Maze::new(a).unwrap(), Maze::new(b).unwrap())
}
