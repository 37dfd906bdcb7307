use std::f64::consts::PI;

use super::{Evaluation, Task};
use crate::error::{QdError, Result};
use crate::geometry::Bounds;

const HALF_WIDTH: f64 = 5.12;

#[derive(Debug, Clone)]
pub struct RastriginTask {
    dim: usize,
}

impl RastriginTask {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(QdError::InvalidParameter(format!("rastrigin needs at least 2 genes, got {dim}")));
        }
        Ok(Self { dim })
    }

    pub fn rastrigin(x: &[f64]) -> f64 {
        10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
    }
}

impl Task for RastriginTask {
    fn name(&self) -> &str {
        "rastrigin"
    }

    fn genome_dim(&self) -> usize {
        self.dim
    }

    fn descriptor_dim(&self) -> usize {
        2
    }

    fn descriptor_bounds(&self) -> Option<Bounds> {
        Some(Bounds::unit(2))
    }

    fn fitness_offset(&self) -> f64 {
        self.dim as f64 * (20.0 + HALF_WIDTH * HALF_WIDTH)
    }

    fn evaluate(&self, genome: &[f64]) -> Evaluation {
        let x: Vec<f64> = genome.iter().map(|g| (2.0 * g - 1.0) * HALF_WIDTH).collect();
        Evaluation { fitness: -Self::rastrigin(&x), descriptor: genome[..2].to_vec() }
    }
}
