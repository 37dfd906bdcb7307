use std::f64::consts::PI;

use super::{Evaluation, Task};
use crate::error::{QdError, Result};
use crate::geometry::Bounds;

/// Planar arm with `n` equal links of total length 1.
#[derive(Debug, Clone)]
pub struct ArmTask {
    joints: usize,
}

impl ArmTask {
    pub fn new(joints: usize) -> Result<Self> {
        if joints < 2 {
            return Err(QdError::InvalidParameter(format!("arm needs at least 2 joints, got {joints}")));
        }
        Ok(Self { joints })
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    /// Joint angles in `[-pi, pi]`.
    pub fn angles(genome: &[f64]) -> Vec<f64> {
        genome.iter().map(|g| (2.0 * g - 1.0) * PI).collect()
    }

    /// Tip position in `[-1, 1]^2`.
    pub fn forward_kinematics(angles: &[f64]) -> (f64, f64) {
        let link = 1.0 / angles.len() as f64;
        let (mut x, mut y, mut heading) = (0.0, 0.0, 0.0);
        for a in angles {
            heading += a;
            x += link * heading.cos();
            y += link * heading.sin();
        }
        (x, y)
    }
}

impl Task for ArmTask {
    fn name(&self) -> &str {
        "arm"
    }

    fn genome_dim(&self) -> usize {
        self.joints
    }

    fn descriptor_dim(&self) -> usize {
        2
    }

    fn descriptor_bounds(&self) -> Option<Bounds> {
        Some(Bounds::unit(2))
    }

    fn fitness_offset(&self) -> f64 {
        // Variance of values confined to [-pi, pi] is at most pi^2.
        PI * PI
    }

    fn evaluate(&self, genome: &[f64]) -> Evaluation {
        let angles = Self::angles(genome);
        let n = angles.len() as f64;
        let mean = angles.iter().sum::<f64>() / n;
        let variance = angles.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        let (x, y) = Self::forward_kinematics(&angles);
        Evaluation { fitness: -variance, descriptor: vec![(x + 1.0) / 2.0, (y + 1.0) / 2.0] }
    }
}
