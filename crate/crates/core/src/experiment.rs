//! The Quality-Diversity generation loop: reproduce, evaluate, concatenate,
//! compete, truncate, with projected metrics logged at a fixed cadence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::competition::Competition;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::geometry::{random_centroids, Bounds, CentroidSet, Provenance};
use crate::matrix::Matrix;
use crate::metrics::{project_and_score, MetricsRecord};
use crate::population::{concat, evaluate, reproduce, select_top_n, EvaluatedBatch, Population};
use crate::tasks::{PcaDescriptorState, Task};

/// A run in progress. Drive it with [`Experiment::step`] or use
/// [`run_experiment`].
pub struct Experiment {
    config: ExperimentConfig,
    task: Box<dyn Task>,
    encoder: Option<PcaDescriptorState>,
    competition: Competition,
    /// Fixed passive grid when descriptor bounds are known up front.
    metric_grid: Option<CentroidSet>,
    rng: ChaCha8Rng,
    population: Population,
    generation: usize,
    evaluations: usize,
    records: Vec<MetricsRecord>,
}

impl std::fmt::Debug for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Experiment")
            .field("task", &self.task.name())
            .field("algorithm", &self.competition.name())
            .field("generation", &self.generation)
            .field("evaluations", &self.evaluations)
            .finish()
    }
}

impl Experiment {
    /// Validates the configuration, then samples, evaluates and scores the
    /// initial population and logs its metrics record.
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let task = config.build_task()?;
        let mut encoder = config.build_encoder()?;
        let bounds = if encoder.is_some() { None } else { task.descriptor_bounds() };
        let competition = config.build_competition(bounds.as_ref())?;
        let metric_grid = match &bounds {
            Some(b) => Some(random_centroids(config.metric_cells, b, config.metric_seed)?),
            None => None,
        };

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let n = config.pop_size;
        let mut genomes = Matrix::zeros(n, task.genome_dim());
        for i in 0..n {
            for g in genomes.row_mut(i) {
                *g = rng.random::<f64>();
            }
        }
        let evals = evaluate(&genomes, task.as_ref(), config.parallel)?;
        let population = match encoder.as_mut() {
            Some(enc) => {
                *enc = enc.refit(&evals.descriptors)?;
                let codes = enc.encode(&evals.descriptors)?;
                Population::with_features(genomes, evals.fitness, codes, Some(evals.descriptors))?
            }
            None => Population::new(genomes, evals.fitness, evals.descriptors)?,
        };

        let mut experiment = Self {
            config,
            task,
            encoder,
            competition,
            metric_grid,
            rng,
            population,
            generation: 0,
            evaluations: n,
            records: Vec::new(),
        };
        experiment.score_population()?;
        experiment.log()?;
        Ok(experiment)
    }

    fn score_population(&mut self) -> Result<()> {
        let scores = self.competition.apply(self.population.fitness(), self.population.descriptors())?;
        self.population.set_competition(scores)
    }

    fn log(&mut self) -> Result<()> {
        let grid = match &self.metric_grid {
            Some(g) => g.clone(),
            None => {
                // Unbounded descriptors: rebuild the passive grid over the
                // current population every time.
                let b = Bounds::enclosing(self.population.descriptors())?;
                let grid = random_centroids(self.config.metric_cells, &b, self.config.metric_seed)?;
                CentroidSet::new(grid.points().clone(), Provenance::DataDriven, self.config.metric_seed)?
            }
        };
        let p = project_and_score(
            self.population.fitness(),
            self.population.descriptors(),
            &grid,
            self.task.fitness_offset(),
        )?;
        self.records.push(MetricsRecord {
            generation: self.generation,
            evaluations: self.evaluations,
            qd_score: p.qd_score,
            coverage: p.coverage,
            max_fitness: p.max_fitness.unwrap_or(f64::NAN),
        });
        Ok(())
    }

    pub fn is_finished(&self) -> bool {
        self.generation >= self.config.generations
    }

    /// Runs one generation. Returns the metrics record if one was logged.
    pub fn step(&mut self) -> Result<Option<MetricsRecord>> {
        let offspring = reproduce(&self.population, &self.config.variation, &mut self.rng)?;
        let evals = evaluate(&offspring, self.task.as_ref(), self.config.parallel)?;
        let batch = match &self.encoder {
            Some(enc) => EvaluatedBatch {
                genomes: offspring,
                fitness: evals.fitness,
                descriptors: enc.encode(&evals.descriptors)?,
                features: Some(evals.descriptors),
            },
            None => EvaluatedBatch {
                genomes: offspring,
                fitness: evals.fitness,
                descriptors: evals.descriptors,
                features: None,
            },
        };
        self.evaluations += batch.fitness.len();
        let mut combined = concat(&self.population, &batch)?;
        let scores = self.competition.apply(combined.fitness(), combined.descriptors())?;
        combined.set_competition(scores)?;
        self.population = select_top_n(&combined, self.config.pop_size)?;
        self.generation += 1;

        if let Some(enc) = &self.encoder {
            if self.generation.is_multiple_of(enc.refit_period()) {
                let features = self.population.features().expect("encoded populations keep features").clone();
                let refit = enc.refit(&features)?;
                self.population.set_descriptors(refit.encode(&features)?)?;
                self.encoder = Some(refit);
                self.score_population()?;
            }
        }

        if self.generation.is_multiple_of(self.config.log_every) || self.is_finished() {
            self.log()?;
            return Ok(self.records.last().copied());
        }
        Ok(None)
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn task(&self) -> &dyn Task {
        self.task.as_ref()
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn records(&self) -> &[MetricsRecord] {
        &self.records
    }

    pub fn into_output(self) -> RunOutput {
        RunOutput { records: self.records, population: self.population, evaluations: self.evaluations }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<MetricsRecord>,
    pub population: Population,
    pub evaluations: usize,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut experiment = Experiment::new(config.clone())?;
    while !experiment.is_finished() {
        experiment.step()?;
    }
    Ok(experiment.into_output())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Algorithm;

    fn small(algo: Algorithm) -> ExperimentConfig {
        let mut c = ExperimentConfig { algorithm: algo, pop_size: 64, generations: 10, log_every: 5, ..Default::default() };
        c.variation.batch_size = 64;
        c.metric_cells = 128;
        c
    }

    #[test]
    fn zero_generations_logs_initial_population_only() {
        let out = run_experiment(&ExperimentConfig { generations: 0, ..small(Algorithm::Dns) }).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!((out.records[0].generation, out.records[0].evaluations), (0, 64));
    }

    #[test]
    fn evaluation_accounting() {
        let out = run_experiment(&small(Algorithm::Dns)).unwrap();
        assert_eq!(out.evaluations, 64 + 10 * 64);
        assert_eq!(out.records.last().unwrap().evaluations, 64 + 10 * 64);
        let gens: Vec<usize> = out.records.iter().map(|r| r.generation).collect();
        assert_eq!(gens, vec![0, 5, 10]);
        assert_eq!(out.population.len(), 64);
    }

    #[test]
    fn final_generation_is_always_logged() {
        let out = run_experiment(&ExperimentConfig { generations: 7, ..small(Algorithm::Dns) }).unwrap();
        let gens: Vec<usize> = out.records.iter().map(|r| r.generation).collect();
        assert_eq!(gens, vec![0, 5, 7]);
    }

    #[test]
    fn every_algorithm_runs() {
        for algo in Algorithm::ALL {
            let out = run_experiment(&small(algo)).unwrap();
            assert_eq!(out.population.len(), 64, "{algo:?}");
            assert!(out.records.iter().all(|r| (0.0..=1.0).contains(&r.coverage)));
        }
    }

    #[test]
    fn learned_descriptors_run() {
        let mut c = small(Algorithm::Dns);
        c.set("task.name", "maze").unwrap();
        c.set("task.descriptor", "pca").unwrap();
        c.set("task.latent_dim", "4").unwrap();
        c.set("task.refit_period", "3").unwrap();
        let out = run_experiment(&c).unwrap();
        assert_eq!(out.population.descriptors().cols(), 4);
        assert_eq!(out.population.features().unwrap().cols(), 20);
    }

    #[test]
    fn best_individual_survives_under_dns() {
        let mut exp = Experiment::new(small(Algorithm::Dns)).unwrap();
        let mut best = exp.population().fitness().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        while !exp.is_finished() {
            exp.step().unwrap();
            let now = exp.population().fitness().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(now >= best);
            best = now;
        }
    }

    #[test]
    fn parallel_and_serial_agree() {
        let a = run_experiment(&ExperimentConfig { parallel: true, ..small(Algorithm::ThresholdElites) }).unwrap();
        let b = run_experiment(&ExperimentConfig { parallel: false, ..small(Algorithm::ThresholdElites) }).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.population, b.population);
    }
}
