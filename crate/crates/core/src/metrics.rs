//! Projected QD metrics.
//!
//! Any population, structured or not, is projected onto an independent grid
//! of centroids. The projection is recomputed from scratch at every call, so
//! nothing persists between logging steps.

use crate::error::{QdError, Result};
use crate::geometry::{random_centroids, Bounds, CentroidSet, Provenance};
use crate::matrix::Matrix;
use crate::tasks::Task;

/// Default number of metric cells.
pub const DEFAULT_METRIC_CELLS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub generation: usize,
    pub evaluations: usize,
    pub qd_score: f64,
    pub coverage: f64,
    pub max_fitness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub qd_score: f64,
    pub coverage: f64,
    /// `None` for an empty population.
    pub max_fitness: Option<f64>,
    pub occupied: usize,
}

pub fn project_and_score(
    fitness: &[f64],
    descriptors: &Matrix,
    grid: &CentroidSet,
    fitness_offset: f64,
) -> Result<Projection> {
    if fitness.len() != descriptors.rows() {
        return Err(QdError::DimensionMismatch { expected: fitness.len(), actual: descriptors.rows() });
    }
    let cells = grid.assign(descriptors)?;
    let mut elite = vec![f64::NEG_INFINITY; grid.len()];
    let mut occupied = vec![false; grid.len()];
    for (&c, &f) in cells.iter().zip(fitness) {
        occupied[c] = true;
        if f > elite[c] {
            elite[c] = f;
        }
    }
    let mut qd_score = 0.0;
    let mut count = 0;
    for (&f, _) in elite.iter().zip(&occupied).filter(|(_, &o)| o) {
        let addend = f + fitness_offset;
        if !(addend >= 0.0) {
            return Err(QdError::NegativeAddend { fitness: f, offset: fitness_offset });
        }
        qd_score += addend;
        count += 1;
    }
    let max_fitness = fitness.iter().copied().fold(None, |m: Option<f64>, f| Some(m.map_or(f, |m| m.max(f))));
    Ok(Projection { qd_score, coverage: count as f64 / grid.len() as f64, max_fitness, occupied: count })
}

/// Passive metric grid: uniform random centroids in the task's descriptor box,
/// or, for tasks without declared bounds, in the bounding box of `sample`.
pub fn make_metric_grid(task: &dyn Task, cells: usize, seed: u64, sample: Option<&Matrix>) -> Result<CentroidSet> {
    match (task.descriptor_bounds(), sample) {
        (Some(bounds), _) => random_centroids(cells, &bounds, seed),
        (None, Some(points)) if !points.is_empty() => {
            let bounds = Bounds::enclosing(points)?;
            let grid = random_centroids(cells, &bounds, seed)?;
            CentroidSet::new(grid.points().clone(), Provenance::DataDriven, seed)
        }
        (None, _) => Err(QdError::InvalidParameter(format!(
            "task '{}' has no descriptor bounds; a population sample is required",
            task.name()
        ))),
    }
}
