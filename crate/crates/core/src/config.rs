//! Experiment configuration in a flat `section.key = value` text format.
//!
//! ```text
//! # comment
//! task.name = maze
//! task.descriptor = trajectory
//! algo.name = dns
//! algo.k = 3
//! run.seed = 7
//! ```
//!
//! Keys may repeat; the last occurrence wins. Unknown keys are rejected.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::competition::{ClusterElitesState, Competition, DnsParams, TeParams};
use crate::error::{QdError, Result};
use crate::geometry::{cvt_centroids, random_centroids, Bounds, CvtParams};
use crate::metrics::DEFAULT_METRIC_CELLS;
use crate::population::{ParentGate, VariationOperator, VariationParams};
use crate::tasks::{ArmTask, DescriptorMode, MazeLayout, MazeTask, PcaDescriptorState, RastriginTask, Task};

/// Threshold values tried when tuning Threshold-Elites.
pub const L_SWEEP_VALUES: [f64; 9] = [0.0001, 0.001, 0.01, 0.1, 0.2, 0.5, 1.0, 2.0, 3.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Dns,
    MapElites,
    ThresholdElites,
    ClusterElites,
    PlainGa,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Dns,
        Algorithm::MapElites,
        Algorithm::ThresholdElites,
        Algorithm::ClusterElites,
        Algorithm::PlainGa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dns => "dns",
            Algorithm::MapElites => "map_elites",
            Algorithm::ThresholdElites => "threshold_elites",
            Algorithm::ClusterElites => "cluster_elites",
            Algorithm::PlainGa => "plain_ga",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name).ok_or_else(|| {
            let valid: Vec<&str> = Self::ALL.iter().map(|a| a.name()).collect();
            QdError::Config(format!("unknown algorithm '{name}' (valid: {})", valid.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Random,
    Cvt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MazeDescriptor {
    FinalPosition,
    Trajectory,
    /// PCA embedding of the sampled trajectory, refit periodically.
    Pca,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayoutSource {
    Preset(String),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub name: String,
    /// Arm joints or Rastrigin genes.
    pub dim: usize,
    pub layout: LayoutSource,
    pub steps: usize,
    pub step_size: f64,
    pub descriptor: MazeDescriptor,
    pub samples: usize,
    pub latent_dim: usize,
    pub refit_period: usize,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self {
            name: "arm".into(),
            dim: 10,
            layout: LayoutSource::Preset("blocks".into()),
            steps: 20,
            step_size: 0.05,
            descriptor: MazeDescriptor::FinalPosition,
            samples: 10,
            latent_dim: 10,
            refit_period: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: TaskSpec,
    pub algorithm: Algorithm,
    pub k: usize,
    /// Threshold-Elites distance; `None` picks the task default.
    pub l: Option<f64>,
    pub k_nov: usize,
    /// Grid cells for MAP-Elites / centroids for Cluster-Elites; `None`
    /// picks the algorithm default.
    pub cells: Option<usize>,
    pub grid: GridKind,
    pub grid_seed: Option<u64>,
    pub variation: VariationParams,
    pub pop_size: usize,
    pub generations: usize,
    pub log_every: usize,
    pub seed: u64,
    pub parallel: bool,
    pub metric_cells: usize,
    pub metric_seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: TaskSpec::default(),
            algorithm: Algorithm::Dns,
            k: DnsParams::default().k,
            l: None,
            k_nov: 3,
            cells: None,
            grid: GridKind::Random,
            grid_seed: None,
            variation: VariationParams::default(),
            pop_size: 256,
            generations: 500,
            log_every: 10,
            seed: 0,
            parallel: true,
            metric_cells: DEFAULT_METRIC_CELLS,
            metric_seed: 2024,
            output_dir: PathBuf::from("runs"),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| QdError::Config(format!("invalid value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(QdError::Config(format!("invalid boolean '{value}' for {key}"))),
    }
}

/// Every key understood by [`ExperimentConfig::set`].
pub const KEYS: &[&str] = &[
    "task.name",
    "task.dim",
    "task.layout",
    "task.layout_file",
    "task.steps",
    "task.step_size",
    "task.descriptor",
    "task.samples",
    "task.latent_dim",
    "task.refit_period",
    "algo.name",
    "algo.k",
    "algo.l",
    "algo.k_nov",
    "algo.cells",
    "algo.grid",
    "algo.grid_seed",
    "variation.operator",
    "variation.iso_sigma",
    "variation.line_sigma",
    "variation.parent_fraction",
    "variation.parent_gate",
    "run.pop_size",
    "run.batch_size",
    "run.generations",
    "run.log_every",
    "run.seed",
    "run.parallel",
    "metrics.cells",
    "metrics.seed",
    "output.dir",
];

impl ExperimentConfig {
    /// Parses config text on top of the defaults. Values are checked for
    /// syntax only; call [`validate`](Self::validate) for semantics.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| QdError::Parse {
                line: n + 1,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            config.set(key.trim(), value.trim()).map_err(|e| QdError::Parse { line: n + 1, message: e.to_string() })?;
        }
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "task.name" => self.task.name = value.to_string(),
            "task.dim" => self.task.dim = parse_num(key, value)?,
            "task.layout" => self.task.layout = LayoutSource::Preset(value.to_string()),
            "task.layout_file" => self.task.layout = LayoutSource::File(PathBuf::from(value)),
            "task.steps" => self.task.steps = parse_num(key, value)?,
            "task.step_size" => self.task.step_size = parse_num(key, value)?,
            "task.descriptor" => {
                self.task.descriptor = match value {
                    "final_position" => MazeDescriptor::FinalPosition,
                    "trajectory" => MazeDescriptor::Trajectory,
                    "pca" => MazeDescriptor::Pca,
                    _ => {
                        return Err(QdError::Config(format!(
                            "invalid descriptor '{value}' (valid: final_position, trajectory, pca)"
                        )))
                    }
                }
            }
            "task.samples" => self.task.samples = parse_num(key, value)?,
            "task.latent_dim" => self.task.latent_dim = parse_num(key, value)?,
            "task.refit_period" => self.task.refit_period = parse_num(key, value)?,
            "algo.name" => self.algorithm = Algorithm::parse(value)?,
            "algo.k" => self.k = parse_num(key, value)?,
            "algo.l" => self.l = if value == "auto" { None } else { Some(parse_num(key, value)?) },
            "algo.k_nov" => self.k_nov = parse_num(key, value)?,
            "algo.cells" => self.cells = if value == "auto" { None } else { Some(parse_num(key, value)?) },
            "algo.grid" => {
                self.grid = match value {
                    "random" => GridKind::Random,
                    "cvt" => GridKind::Cvt,
                    _ => return Err(QdError::Config(format!("invalid grid '{value}' (valid: random, cvt)"))),
                }
            }
            "algo.grid_seed" => self.grid_seed = if value == "auto" { None } else { Some(parse_num(key, value)?) },
            "variation.operator" => {
                self.variation.operator = match value {
                    "iso_line" => VariationOperator::IsoLine,
                    "gaussian" => VariationOperator::Gaussian,
                    _ => {
                        return Err(QdError::Config(format!("invalid operator '{value}' (valid: iso_line, gaussian)")))
                    }
                }
            }
            "variation.iso_sigma" => self.variation.iso_sigma = parse_num(key, value)?,
            "variation.line_sigma" => self.variation.line_sigma = parse_num(key, value)?,
            "variation.parent_fraction" => self.variation.parent_pool_fraction = parse_num(key, value)?,
            "variation.parent_gate" => {
                self.variation.parent_gate = match value {
                    "competition" => ParentGate::Competition,
                    "fitness" => ParentGate::RawFitness,
                    _ => {
                        return Err(QdError::Config(format!(
                            "invalid parent gate '{value}' (valid: competition, fitness)"
                        )))
                    }
                }
            }
            "run.pop_size" => self.pop_size = parse_num(key, value)?,
            "run.batch_size" => self.variation.batch_size = parse_num(key, value)?,
            "run.generations" => self.generations = parse_num(key, value)?,
            "run.log_every" => self.log_every = parse_num(key, value)?,
            "run.seed" => self.seed = parse_num(key, value)?,
            "run.parallel" => self.parallel = parse_bool(key, value)?,
            "metrics.cells" => self.metric_cells = parse_num(key, value)?,
            "metrics.seed" => self.metric_seed = parse_num(key, value)?,
            "output.dir" => self.output_dir = PathBuf::from(value),
            _ => return Err(QdError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Every setting, defaults included, in the text format.
    pub fn to_text(&self) -> String {
        let auto = |v: Option<String>| v.unwrap_or_else(|| "auto".to_string());
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("task.name", self.task.name.clone());
        put("task.dim", self.task.dim.to_string());
        match &self.task.layout {
            LayoutSource::Preset(p) => put("task.layout", p.clone()),
            LayoutSource::File(f) => put("task.layout_file", f.display().to_string()),
        }
        put("task.steps", self.task.steps.to_string());
        put("task.step_size", self.task.step_size.to_string());
        put(
            "task.descriptor",
            match self.task.descriptor {
                MazeDescriptor::FinalPosition => "final_position",
                MazeDescriptor::Trajectory => "trajectory",
                MazeDescriptor::Pca => "pca",
            }
            .into(),
        );
        put("task.samples", self.task.samples.to_string());
        put("task.latent_dim", self.task.latent_dim.to_string());
        put("task.refit_period", self.task.refit_period.to_string());
        put("algo.name", self.algorithm.name().into());
        put("algo.k", self.k.to_string());
        put("algo.l", auto(self.l.map(|l| l.to_string())));
        put("algo.k_nov", self.k_nov.to_string());
        put("algo.cells", auto(self.cells.map(|c| c.to_string())));
        put("algo.grid", match self.grid { GridKind::Random => "random", GridKind::Cvt => "cvt" }.into());
        put("algo.grid_seed", auto(self.grid_seed.map(|s| s.to_string())));
        put(
            "variation.operator",
            match self.variation.operator {
                VariationOperator::IsoLine => "iso_line",
                VariationOperator::Gaussian => "gaussian",
            }
            .into(),
        );
        put("variation.iso_sigma", self.variation.iso_sigma.to_string());
        put("variation.line_sigma", self.variation.line_sigma.to_string());
        put("variation.parent_fraction", self.variation.parent_pool_fraction.to_string());
        put(
            "variation.parent_gate",
            match self.variation.parent_gate {
                ParentGate::Competition => "competition",
                ParentGate::RawFitness => "fitness",
            }
            .into(),
        );
        put("run.pop_size", self.pop_size.to_string());
        put("run.batch_size", self.variation.batch_size.to_string());
        put("run.generations", self.generations.to_string());
        put("run.log_every", self.log_every.to_string());
        put("run.seed", self.seed.to_string());
        put("run.parallel", self.parallel.to_string());
        put("metrics.cells", self.metric_cells.to_string());
        put("metrics.seed", self.metric_seed.to_string());
        put("output.dir", self.output_dir.display().to_string());
        out
    }

    pub fn batch_size(&self) -> usize {
        self.variation.batch_size
    }

    /// Threshold-Elites distance actually used.
    pub fn resolved_l(&self) -> f64 {
        self.l.unwrap_or_else(|| default_l(&self.task))
    }

    /// MAP-Elites cells default to the population size; Cluster-Elites
    /// centroids to half of it, leaving room for one elite per centroid.
    pub fn resolved_cells(&self) -> usize {
        self.cells.unwrap_or(match self.algorithm {
            Algorithm::ClusterElites => (self.pop_size / 2).max(1),
            _ => self.pop_size,
        })
    }

    pub fn resolved_grid_seed(&self) -> u64 {
        self.grid_seed.unwrap_or(self.seed.wrapping_add(0x9E37_79B9_7F4A_7C15))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(QdError::Config(m));
        if self.pop_size < 2 {
            return fail(format!("run.pop_size must be at least 2, got {}", self.pop_size));
        }
        if self.log_every == 0 {
            return fail("run.log_every must be positive".into());
        }
        if self.metric_cells == 0 {
            return fail("metrics.cells must be positive".into());
        }
        if self.k == 0 || self.k_nov == 0 {
            return fail("algo.k and algo.k_nov must be positive".into());
        }
        if let Some(l) = self.l {
            if !(l > 0.0 && l.is_finite()) {
                return fail(format!("algo.l must be positive, got {l}"));
            }
        }
        if self.cells == Some(0) {
            return fail("algo.cells must be positive".into());
        }
        self.variation.validate().or_else(|e| fail(e.to_string()))?;
        let task = self.build_task()?;
        let encoder = self.build_encoder()?;
        if let Some(enc) = &encoder {
            if self.pop_size < enc.latent_dim() {
                return fail(format!(
                    "run.pop_size {} is smaller than task.latent_dim {}",
                    self.pop_size,
                    enc.latent_dim()
                ));
            }
        }
        if self.algorithm == Algorithm::MapElites && (encoder.is_some() || task.descriptor_bounds().is_none()) {
            return fail("map_elites needs a task with bounded descriptors".into());
        }
        Ok(())
    }

    pub fn build_task(&self) -> Result<Box<dyn Task>> {
        let t = &self.task;
        match t.name.as_str() {
            "arm" => Ok(Box::new(ArmTask::new(t.dim)?)),
            "rastrigin" => Ok(Box::new(RastriginTask::new(t.dim)?)),
            "maze" => {
                let layout = match &t.layout {
                    LayoutSource::Preset(name) => MazeLayout::preset(name, t.steps, t.step_size)?,
                    LayoutSource::File(path) => {
                        let text = std::fs::read_to_string(path)
                            .map_err(|e| QdError::Config(format!("cannot read {}: {e}", path.display())))?;
                        MazeLayout::from_grid(&text, t.steps, t.step_size)?
                    }
                };
                let mode = match t.descriptor {
                    MazeDescriptor::FinalPosition => DescriptorMode::FinalPosition,
                    MazeDescriptor::Trajectory | MazeDescriptor::Pca => DescriptorMode::Trajectory,
                };
                Ok(Box::new(MazeTask::new(layout, t.samples, mode)?))
            }
            other => {
                let valid: Vec<&str> = crate::tasks::TASK_NAMES.iter().map(|(n, _)| *n).collect();
                Err(QdError::Config(format!("unknown task '{other}' (valid: {})", valid.join(", "))))
            }
        }
    }

    /// Learned descriptor encoder, for tasks whose descriptors are embeddings.
    pub fn build_encoder(&self) -> Result<Option<PcaDescriptorState>> {
        if self.task.name == "maze" && self.task.descriptor == MazeDescriptor::Pca {
            if 2 * self.task.samples < self.task.latent_dim {
                return Err(QdError::Config(format!(
                    "task.latent_dim {} exceeds the trajectory dimension {}",
                    self.task.latent_dim,
                    2 * self.task.samples
                )));
            }
            Ok(Some(PcaDescriptorState::new(self.task.latent_dim, self.task.refit_period)?))
        } else {
            Ok(None)
        }
    }

    /// The competition function, built against the descriptor box `bounds`
    /// where a grid is required.
    pub fn build_competition(&self, bounds: Option<&Bounds>) -> Result<Competition> {
        Ok(match self.algorithm {
            Algorithm::Dns => Competition::Dns(DnsParams { k: self.k }),
            Algorithm::ThresholdElites => Competition::ThresholdElites(TeParams { l: self.resolved_l(), k_nov: self.k_nov }),
            Algorithm::ClusterElites => Competition::ClusterElites(ClusterElitesState::new(self.resolved_cells())?),
            Algorithm::PlainGa => Competition::PlainGa,
            Algorithm::MapElites => {
                let bounds =
                    bounds.ok_or_else(|| QdError::Config("map_elites needs bounded descriptors".into()))?;
                let cells = self.resolved_cells();
                let seed = self.resolved_grid_seed();
                Competition::MapElites(match self.grid {
                    GridKind::Random => random_centroids(cells, bounds, seed)?,
                    GridKind::Cvt => cvt_centroids(bounds, &CvtParams::new(cells, seed))?,
                })
            }
        })
    }
}

/// Default Threshold-Elites distance for a task.
///
/// Two-dimensional bounded descriptors use half the spacing of a uniform
/// 1024-cell grid over the unit box. Trajectory descriptors with `n` sampled
/// points use the tuned values `0.01` (n <= 2), `0.1` (n <= 5), `0.5`
/// (n <= 40), `1` (n <= 100) and `3` beyond; learned descriptors use `0.2`.
pub fn default_l(task: &TaskSpec) -> f64 {
    let grid_spacing = 0.5 * (1.0f64 / 1024.0).sqrt();
    if task.name != "maze" {
        return grid_spacing;
    }
    match task.descriptor {
        MazeDescriptor::FinalPosition => grid_spacing,
        MazeDescriptor::Pca => 0.2,
        MazeDescriptor::Trajectory => match task.samples {
            0..=2 => 0.01,
            3..=5 => 0.1,
            6..=40 => 0.5,
            41..=100 => 1.0,
            _ => 3.0,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_and_overrides() {
        let text = "# demo\ntask.name = maze\n\ntask.descriptor = trajectory\nalgo.name = threshold_elites\nalgo.l = 0.3\nrun.seed = 5\nrun.seed = 6\n";
        let c = ExperimentConfig::from_text(text).unwrap();
        assert_eq!(c.task.name, "maze");
        assert_eq!(c.algorithm, Algorithm::ThresholdElites);
        assert_eq!(c.resolved_l(), 0.3);
        assert_eq!(c.seed, 6);
        c.validate().unwrap();
    }

    #[test]
    fn reports_bad_lines() {
        let err = ExperimentConfig::from_text("run.seed = 1\nnot a pair\n").unwrap_err();
        assert!(matches!(err, QdError::Parse { line: 2, .. }));
        let err = ExperimentConfig::from_text("algo.name = cmaes").unwrap_err();
        assert!(err.to_string().contains("dns, map_elites, threshold_elites, cluster_elites, plain_ga"));
        assert!(ExperimentConfig::from_text("run.sed = 1").is_err());
        assert!(ExperimentConfig::from_text("run.pop_size = -3").is_err());
    }

    #[test]
    fn semantic_validation() {
        let mut c = ExperimentConfig { pop_size: 1, ..Default::default() };
        assert!(c.validate().is_err());
        c.pop_size = 16;
        c.validate().unwrap();
        c.set("task.name", "maze").unwrap();
        c.set("task.descriptor", "pca").unwrap();
        c.set("algo.name", "map_elites").unwrap();
        assert!(c.validate().is_err());
        c.set("algo.name", "dns").unwrap();
        c.validate().unwrap();
        c.set("task.name", "sphere").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn default_thresholds() {
        let mut t = TaskSpec { name: "maze".into(), descriptor: MazeDescriptor::Trajectory, ..Default::default() };
        let expected = [(2, 0.01), (5, 0.1), (10, 0.5), (20, 0.5), (50, 1.0), (1000, 3.0)];
        for (n, l) in expected {
            t.samples = n;
            assert_eq!(default_l(&t), l);
        }
        assert_eq!(default_l(&TaskSpec::default()), 1.0 / 64.0);
    }

    #[test]
    fn resolved_cells_defaults() {
        let mut c = ExperimentConfig { pop_size: 100, ..Default::default() };
        c.algorithm = Algorithm::MapElites;
        assert_eq!(c.resolved_cells(), 100);
        c.algorithm = Algorithm::ClusterElites;
        assert_eq!(c.resolved_cells(), 50);
    }

    proptest! {
        #[test]
        fn resolved_text_round_trips(
            seed in any::<u64>(),
            pop in 2usize..1000,
            sigma in 0.0f64..1.0,
            l in proptest::option::of(1e-6f64..10.0),
            algo in 0usize..5,
        ) {
            let mut c = ExperimentConfig { seed, pop_size: pop, l, ..Default::default() };
            c.variation.iso_sigma = sigma;
            c.algorithm = Algorithm::ALL[algo];
            prop_assert_eq!(ExperimentConfig::from_text(&c.to_text()).unwrap(), c);
        }
    }
}
