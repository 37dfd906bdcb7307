//! Point robot navigating a unit-square arena with rectangular walls.

use super::{Evaluation, Task};
use crate::error::{QdError, Result};
use crate::geometry::Bounds;

/// Axis-aligned wall occupying `[min, max]` (closed for collision purposes,
/// the robot may rest on its faces).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wall {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Wall {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { min: [x0, y0], max: [x1, y1] }
    }

    /// Strict interior test.
    pub fn contains_interior(&self, p: [f64; 2]) -> bool {
        self.min[0] < p[0] && p[0] < self.max[0] && self.min[1] < p[1] && p[1] < self.max[1]
    }

    fn spans(&self, axis: usize, v: f64) -> bool {
        self.min[axis] <= v && v <= self.max[axis]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MazeLayout {
    walls: Vec<Wall>,
    start: [f64; 2],
    steps: usize,
    step_size: f64,
}

impl MazeLayout {
    pub fn new(walls: Vec<Wall>, start: [f64; 2], steps: usize, step_size: f64) -> Result<Self> {
        let invalid = |m: String| Err(QdError::InvalidParameter(m));
        if steps == 0 {
            return invalid("maze needs at least one step".into());
        }
        if !(step_size > 0.0 && step_size.is_finite()) {
            return invalid(format!("step size must be positive, got {step_size}"));
        }
        let in_arena = |v: f64| (0.0..=1.0).contains(&v);
        if !start.iter().all(|&v| in_arena(v)) {
            return invalid(format!("start {start:?} lies outside the arena"));
        }
        for w in &walls {
            let ok = (0..2).all(|a| in_arena(w.min[a]) && in_arena(w.max[a]) && w.min[a] < w.max[a]);
            if !ok {
                return invalid(format!("wall {w:?} is empty or leaves the arena"));
            }
            if w.contains_interior(start) {
                return invalid(format!("start {start:?} lies inside wall {w:?}"));
            }
        }
        Ok(Self { walls, start, steps, step_size })
    }

    /// Built-in layouts: `open`, `blocks` (four square blocks covering 36% of
    /// the arena around a central start) and `corridors` (three horizontal
    /// walls with alternating gaps).
    pub fn preset(name: &str, steps: usize, step_size: f64) -> Result<Self> {
        match name {
            "open" => Self::new(Vec::new(), [0.5, 0.5], steps, step_size),
            "blocks" => Self::new(
                vec![
                    Wall::new(0.1, 0.1, 0.4, 0.4),
                    Wall::new(0.6, 0.1, 0.9, 0.4),
                    Wall::new(0.1, 0.6, 0.4, 0.9),
                    Wall::new(0.6, 0.6, 0.9, 0.9),
                ],
                [0.5, 0.5],
                steps,
                step_size,
            ),
            "corridors" => Self::new(
                vec![
                    Wall::new(0.0, 0.22, 0.75, 0.28),
                    Wall::new(0.25, 0.47, 1.0, 0.53),
                    Wall::new(0.0, 0.72, 0.75, 0.78),
                ],
                [0.1, 0.1],
                steps,
                step_size,
            ),
            other => Err(QdError::InvalidParameter(format!(
                "unknown maze layout '{other}' (expected open, blocks or corridors)"
            ))),
        }
    }

    /// Parses a character grid: `#` wall cell, `.` free cell, `S` start (the
    /// centre of that cell, exactly one required). The grid is stretched over
    /// the unit square, first line at the top. Blank lines are ignored.
    pub fn from_grid(text: &str, steps: usize, step_size: f64) -> Result<Self> {
        let rows: Vec<&str> =
            text.lines().map(|l| l.trim_end_matches('\r')).filter(|l| !l.trim().is_empty()).collect();
        if rows.is_empty() {
            return Err(QdError::Parse { line: 1, message: "empty maze grid".into() });
        }
        let width = rows[0].chars().count();
        let height = rows.len();
        let mut cells = vec![vec![false; width]; height];
        let mut start = None;
        for (r, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(QdError::Parse {
                    line: r + 1,
                    message: format!("row has {} cells, expected {width}", row.chars().count()),
                });
            }
            for (c, ch) in row.chars().enumerate() {
                match ch {
                    '#' => cells[r][c] = true,
                    '.' => {}
                    'S' if start.is_some() => {
                        return Err(QdError::Parse { line: r + 1, message: "more than one start cell".into() })
                    }
                    'S' => start = Some((r, c)),
                    other => {
                        return Err(QdError::Parse { line: r + 1, message: format!("unexpected character {other:?}") })
                    }
                }
            }
        }
        let (sr, sc) = start.ok_or(QdError::Parse { line: height, message: "no start cell 'S'".into() })?;
        let (w, h) = (width as f64, height as f64);

        // Merge horizontal runs, then stack identical runs of consecutive rows.
        let mut open: Vec<(usize, usize, usize, usize)> = Vec::new(); // (c0, c1, r0, r1) exclusive ends
        let mut done = Vec::new();
        for (r, row) in cells.iter().enumerate() {
            let mut runs = Vec::new();
            let mut c = 0;
            while c < width {
                if row[c] {
                    let c0 = c;
                    while c < width && row[c] {
                        c += 1;
                    }
                    runs.push((c0, c));
                } else {
                    c += 1;
                }
            }
            let mut next = Vec::new();
            for (c0, c1) in runs {
                match open.iter().position(|&(a, b, _, r1)| a == c0 && b == c1 && r1 == r) {
                    Some(p) => {
                        let mut run = open.swap_remove(p);
                        run.3 = r + 1;
                        next.push(run);
                    }
                    None => next.push((c0, c1, r, r + 1)),
                }
            }
            done.append(&mut open);
            open = next;
        }
        done.append(&mut open);
        done.sort_unstable_by_key(|&(c0, _, r0, _)| (r0, c0));
        let walls = done
            .into_iter()
            .map(|(c0, c1, r0, r1)| Wall::new(c0 as f64 / w, 1.0 - r1 as f64 / h, c1 as f64 / w, 1.0 - r0 as f64 / h))
            .collect();
        let start = [(sc as f64 + 0.5) / w, 1.0 - (sr as f64 + 0.5) / h];
        Self::new(walls, start, steps, step_size)
    }

    pub fn walls(&self) -> &[Wall] {
        &self.walls
    }

    pub fn start(&self) -> [f64; 2] {
        self.start
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    /// Fraction of the arena covered by walls (area of their union).
    pub fn blocked_fraction(&self) -> f64 {
        let mut xs: Vec<f64> = self.walls.iter().flat_map(|w| [w.min[0], w.max[0]]).collect();
        let mut ys: Vec<f64> = self.walls.iter().flat_map(|w| [w.min[1], w.max[1]]).collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        xs.dedup();
        ys.dedup();
        let mut area = 0.0;
        for xw in xs.windows(2) {
            for yw in ys.windows(2) {
                let centre = [(xw[0] + xw[1]) / 2.0, (yw[0] + yw[1]) / 2.0];
                if self.walls.iter().any(|w| w.contains_interior(centre)) {
                    area += (xw[1] - xw[0]) * (yw[1] - yw[0]);
                }
            }
        }
        area
    }

    /// Moves along one axis, stopping at the arena edge or the first wall face.
    fn slide(&self, pos: [f64; 2], axis: usize, delta: f64) -> f64 {
        let other = 1 - axis;
        let from = pos[axis];
        let mut to = (from + delta).clamp(0.0, 1.0);
        for w in self.walls.iter().filter(|w| w.spans(other, pos[other])) {
            if to > from && w.min[axis] >= from && w.min[axis] < to {
                to = w.min[axis];
            } else if to < from && w.max[axis] <= from && w.max[axis] > to {
                to = w.max[axis];
            }
        }
        to
    }

    /// Integrates velocity commands (each component in `[-1, 1]`), returning
    /// the position after every step. Each axis is applied in turn (x then y)
    /// and blocked independently on contact.
    pub fn simulate(&self, commands: &[[f64; 2]]) -> Vec<[f64; 2]> {
        let mut pos = self.start;
        commands
            .iter()
            .map(|cmd| {
                pos[0] = self.slide(pos, 0, cmd[0] * self.step_size);
                pos[1] = self.slide(pos, 1, cmd[1] * self.step_size);
                pos
            })
            .collect()
    }

    pub fn is_free(&self, p: [f64; 2]) -> bool {
        (0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]) && !self.walls.iter().any(|w| w.contains_interior(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescriptorMode {
    FinalPosition,
    /// `n_samples` evenly indexed positions along the trajectory.
    Trajectory,
}

#[derive(Debug, Clone)]
pub struct MazeTask {
    layout: MazeLayout,
    samples: usize,
    mode: DescriptorMode,
}

impl MazeTask {
    pub fn new(layout: MazeLayout, samples: usize, mode: DescriptorMode) -> Result<Self> {
        if mode == DescriptorMode::Trajectory && (samples == 0 || samples > layout.steps) {
            return Err(QdError::InvalidParameter(format!(
                "trajectory samples must lie in 1..={}, got {samples}",
                layout.steps
            )));
        }
        Ok(Self { layout, samples, mode })
    }

    pub fn layout(&self) -> &MazeLayout {
        &self.layout
    }

    pub fn mode(&self) -> DescriptorMode {
        self.mode
    }

    /// Step indices (0-based) whose positions make up a trajectory descriptor.
    pub fn sample_steps(&self) -> Vec<usize> {
        let t = self.layout.steps;
        (0..self.samples).map(|s| (s + 1) * t / self.samples - 1).collect()
    }

    pub fn commands(genome: &[f64]) -> Vec<[f64; 2]> {
        genome.chunks_exact(2).map(|c| [2.0 * c[0] - 1.0, 2.0 * c[1] - 1.0]).collect()
    }
}

impl Task for MazeTask {
    fn name(&self) -> &str {
        "maze"
    }

    fn genome_dim(&self) -> usize {
        2 * self.layout.steps
    }

    fn descriptor_dim(&self) -> usize {
        match self.mode {
            DescriptorMode::FinalPosition => 2,
            DescriptorMode::Trajectory => 2 * self.samples,
        }
    }

    fn descriptor_bounds(&self) -> Option<Bounds> {
        Some(Bounds::unit(self.descriptor_dim()))
    }

    fn fitness_offset(&self) -> f64 {
        2.0 * self.layout.steps as f64
    }

    fn evaluate(&self, genome: &[f64]) -> Evaluation {
        let commands = Self::commands(genome);
        let energy: f64 = commands.iter().map(|c| c[0] * c[0] + c[1] * c[1]).sum();
        let path = self.layout.simulate(&commands);
        let descriptor = match self.mode {
            DescriptorMode::FinalPosition => path.last().map_or(self.layout.start, |p| *p).to_vec(),
            DescriptorMode::Trajectory => self.sample_steps().into_iter().flat_map(|s| path[s]).collect(),
        };
        Evaluation { fitness: -energy, descriptor }
    }
}
