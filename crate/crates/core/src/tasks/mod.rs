//! Benchmark tasks. Every task maps a genome in `[0, 1]^n` to a fitness and a
//! descriptor; tasks rescale the genome internally.

mod arm;
mod maze;
mod pca;
mod rastrigin;

pub use arm::ArmTask;
pub use maze::{DescriptorMode, MazeLayout, MazeTask, Wall};
pub use pca::{pca_refit, PcaDescriptorState};
pub use rastrigin::RastriginTask;

use crate::geometry::Bounds;

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub descriptor: Vec<f64>,
}

pub trait Task: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;

    fn genome_dim(&self) -> usize;

    fn descriptor_dim(&self) -> usize;

    /// Box containing every reachable descriptor, when known in advance.
    fn descriptor_bounds(&self) -> Option<Bounds>;

    /// Added to elite fitness when computing QD scores so that every addend
    /// is non-negative. Equals minus the task's fitness lower bound.
    fn fitness_offset(&self) -> f64;

    fn evaluate(&self, genome: &[f64]) -> Evaluation;
}

/// Names accepted by the experiment configuration, with a short description.
pub const TASK_NAMES: &[(&str, &str)] = &[
    ("arm", "planar redundant arm; descriptor = tip position, fitness = -variance of joint angles"),
    ("rastrigin", "Rastrigin function; descriptor = first two genes"),
    ("maze", "point robot in a walled arena; fitness = -control energy"),
];
