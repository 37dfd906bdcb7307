//! Population representation and the stages of one generation:
//! reproduce, concatenate, evaluate, truncate.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{QdError, Result};
use crate::matrix::Matrix;
use crate::tasks::Task;

/// Individuals stored as parallel arrays.
///
/// `features` holds the raw behaviour the task produced when descriptors are
/// derived from it by a learned encoder; otherwise it is `None` and the task
/// output is the descriptor itself. `competition` is empty until a competition
/// function has scored the population.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    genomes: Matrix,
    fitness: Vec<f64>,
    descriptors: Matrix,
    features: Option<Matrix>,
    competition: Vec<f64>,
}

impl Population {
    pub fn new(genomes: Matrix, fitness: Vec<f64>, descriptors: Matrix) -> Result<Self> {
        Self::with_features(genomes, fitness, descriptors, None)
    }

    pub fn with_features(
        genomes: Matrix,
        fitness: Vec<f64>,
        descriptors: Matrix,
        features: Option<Matrix>,
    ) -> Result<Self> {
        let n = genomes.rows();
        for len in [fitness.len(), descriptors.rows()].into_iter().chain(features.as_ref().map(Matrix::rows)) {
            if len != n {
                return Err(QdError::DimensionMismatch { expected: n, actual: len });
            }
        }
        Ok(Self { genomes, fitness, descriptors, features, competition: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.genomes.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn genomes(&self) -> &Matrix {
        &self.genomes
    }

    pub fn fitness(&self) -> &[f64] {
        &self.fitness
    }

    pub fn descriptors(&self) -> &Matrix {
        &self.descriptors
    }

    pub fn features(&self) -> Option<&Matrix> {
        self.features.as_ref()
    }

    /// Competition fitness, or an empty slice when not yet computed.
    pub fn competition(&self) -> &[f64] {
        &self.competition
    }

    pub fn has_competition(&self) -> bool {
        !self.is_empty() && self.competition.len() == self.len()
    }

    pub fn set_competition(&mut self, scores: Vec<f64>) -> Result<()> {
        if scores.len() != self.len() {
            return Err(QdError::DimensionMismatch { expected: self.len(), actual: scores.len() });
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(QdError::NotANumber("competition fitness"));
        }
        self.competition = scores;
        Ok(())
    }

    /// Replaces descriptors, e.g. after a learned encoder has been refit.
    pub fn set_descriptors(&mut self, descriptors: Matrix) -> Result<()> {
        if descriptors.rows() != self.len() {
            return Err(QdError::DimensionMismatch { expected: self.len(), actual: descriptors.rows() });
        }
        self.descriptors = descriptors;
        self.competition.clear();
        Ok(())
    }

    /// Individuals at `indices`, in that order. Competition fitness is carried
    /// along when present.
    pub fn subset(&self, indices: &[usize]) -> Population {
        Population {
            genomes: self.genomes.select_rows(indices),
            fitness: indices.iter().map(|&i| self.fitness[i]).collect(),
            descriptors: self.descriptors.select_rows(indices),
            features: self.features.as_ref().map(|f| f.select_rows(indices)),
            competition: if self.has_competition() {
                indices.iter().map(|&i| self.competition[i]).collect()
            } else {
                Vec::new()
            },
        }
    }
}

/// Freshly evaluated offspring, ready to be appended to a population.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedBatch {
    pub genomes: Matrix,
    pub fitness: Vec<f64>,
    pub descriptors: Matrix,
    pub features: Option<Matrix>,
}

impl EvaluatedBatch {
    pub fn into_population(self) -> Result<Population> {
        Population::with_features(self.genomes, self.fitness, self.descriptors, self.features)
    }
}

/// Parents first, offspring appended. Competition fitness is reset since it
/// must be recomputed over the combined population.
pub fn concat(pop: &Population, batch: &EvaluatedBatch) -> Result<Population> {
    let b = batch.genomes.rows();
    if batch.fitness.len() != b || batch.descriptors.rows() != b {
        return Err(QdError::DimensionMismatch { expected: b, actual: batch.fitness.len().min(batch.descriptors.rows()) });
    }
    if b == 0 {
        return Ok(pop.clone());
    }
    if !pop.is_empty() && batch.genomes.cols() != pop.genomes.cols() {
        return Err(QdError::DimensionMismatch { expected: pop.genomes.cols(), actual: batch.genomes.cols() });
    }
    if !pop.is_empty() && batch.descriptors.cols() != pop.descriptors.cols() {
        return Err(QdError::DimensionMismatch {
            expected: pop.descriptors.cols(),
            actual: batch.descriptors.cols(),
        });
    }
    let features = match (&pop.features, &batch.features) {
        (None, None) => None,
        (Some(a), Some(b)) => Some(a.vstack(b)?),
        _ => return Err(QdError::InvalidParameter("feature matrices present on only one side".into())),
    };
    let mut fitness = pop.fitness.clone();
    fitness.extend_from_slice(&batch.fitness);
    Population::with_features(
        pop.genomes.vstack(&batch.genomes)?,
        fitness,
        pop.descriptors.vstack(&batch.descriptors)?,
        features,
    )
}

/// Raw task output for a batch of genomes.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluations {
    pub fitness: Vec<f64>,
    pub descriptors: Matrix,
}

/// Applies the task to every genome, preserving order. With `parallel` the
/// batch is split across the rayon pool; the result is identical either way.
pub fn evaluate(genomes: &Matrix, task: &dyn Task, parallel: bool) -> Result<Evaluations> {
    if genomes.rows() > 0 && genomes.cols() != task.genome_dim() {
        return Err(QdError::DimensionMismatch { expected: task.genome_dim(), actual: genomes.cols() });
    }
    let outputs: Vec<_> = if parallel {
        (0..genomes.rows()).into_par_iter().map(|i| task.evaluate(genomes.row(i))).collect()
    } else {
        genomes.iter_rows().map(|g| task.evaluate(g)).collect()
    };
    let mut fitness = Vec::with_capacity(outputs.len());
    let mut descriptors = Matrix::empty(task.descriptor_dim());
    for (index, out) in outputs.into_iter().enumerate() {
        if !out.fitness.is_finite() || out.descriptor.iter().any(|d| !d.is_finite()) {
            return Err(QdError::NonFiniteEvaluation { index });
        }
        fitness.push(out.fitness);
        descriptors.push_row(&out.descriptor)?;
    }
    Ok(Evaluations { fitness, descriptors })
}

/// Indices of the `n` highest scores, ordered by descending score with ties
/// resolved towards the lower index.
pub fn top_n_indices(scores: &[f64], n: usize) -> Result<Vec<usize>> {
    if n > scores.len() {
        return Err(QdError::SelectionTooLarge { requested: n, available: scores.len() });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Stable sort keeps equal scores in index order.
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order.truncate(n);
    Ok(order)
}

/// Truncation selection on competition fitness. Survivors keep their
/// relative order from `pop`.
pub fn select_top_n(pop: &Population, n: usize) -> Result<Population> {
    if !pop.has_competition() && n > 0 {
        return Err(QdError::InvalidParameter("competition fitness has not been computed".into()));
    }
    let mut keep = top_n_indices(pop.competition(), n)?;
    keep.sort_unstable();
    Ok(pop.subset(&keep))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariationOperator {
    /// Isotropic Gaussian noise plus Gaussian noise along the parent-to-parent line.
    IsoLine,
    /// Isotropic Gaussian noise on a single parent.
    Gaussian,
}

/// Which score decides membership of the parent pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParentGate {
    Competition,
    RawFitness,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationParams {
    pub operator: VariationOperator,
    /// Standard deviation of the isotropic component.
    pub iso_sigma: f64,
    /// Standard deviation of the line component.
    pub line_sigma: f64,
    pub batch_size: usize,
    pub parent_pool_fraction: f64,
    pub parent_gate: ParentGate,
}

impl Default for VariationParams {
    fn default() -> Self {
        Self {
            operator: VariationOperator::IsoLine,
            iso_sigma: 0.01,
            line_sigma: 0.1,
            batch_size: 256,
            parent_pool_fraction: 0.5,
            parent_gate: ParentGate::Competition,
        }
    }
}

impl VariationParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(QdError::InvalidParameter(what.to_string()));
        if !(self.iso_sigma >= 0.0 && self.iso_sigma.is_finite()) {
            return bad("iso_sigma must be a finite non-negative number");
        }
        if !(self.line_sigma >= 0.0 && self.line_sigma.is_finite()) {
            return bad("line_sigma must be a finite non-negative number");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.parent_pool_fraction > 0.0 && self.parent_pool_fraction <= 1.0) {
            return bad("parent pool fraction must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Generates `batch_size` offspring from the best-scoring part of `pop`.
///
/// Parents are drawn uniformly, with replacement, from the
/// `ceil(N * parent_pool_fraction)` individuals ranked highest by the gate
/// score. Offspring genomes are clipped to `[0, 1]`.
pub fn reproduce<R: Rng>(pop: &Population, params: &VariationParams, rng: &mut R) -> Result<Matrix> {
    params.validate()?;
    let n = pop.len();
    if n < 2 {
        return Err(QdError::InsufficientParents(n));
    }
    let scores = match params.parent_gate {
        ParentGate::Competition => {
            if !pop.has_competition() {
                return Err(QdError::InvalidParameter("competition fitness has not been computed".into()));
            }
            pop.competition()
        }
        ParentGate::RawFitness => pop.fitness(),
    };
    let pool_size = ((n as f64 * params.parent_pool_fraction).ceil() as usize).clamp(1, n);
    let pool = top_n_indices(scores, pool_size)?;

    let dim = pop.genomes().cols();
    let mut offspring = Matrix::zeros(params.batch_size, dim);
    for b in 0..params.batch_size {
        let first = pop.genomes().row(pool[rng.random_range(0..pool.len())]);
        let child = offspring.row_mut(b);
        match params.operator {
            VariationOperator::IsoLine => {
                let second = pop.genomes().row(pool[rng.random_range(0..pool.len())]);
                for (c, &x) in child.iter_mut().zip(first) {
                    let z: f64 = rng.sample(StandardNormal);
                    *c = x + params.iso_sigma * z;
                }
                let line: f64 = rng.sample(StandardNormal);
                for ((c, &x), &y) in child.iter_mut().zip(first).zip(second) {
                    *c += params.line_sigma * line * (y - x);
                }
            }
            VariationOperator::Gaussian => {
                for (c, &x) in child.iter_mut().zip(first) {
                    let z: f64 = rng.sample(StandardNormal);
                    *c = x + params.iso_sigma * z;
                }
            }
        }
        for c in child.iter_mut() {
            *c = c.clamp(0.0, 1.0);
        }
    }
    Ok(offspring)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pop_of(genomes: &[&[f64]], fitness: &[f64]) -> Population {
        let g = Matrix::from_rows(genomes).unwrap();
        let d = Matrix::from_rows(&vec![[0.0]; genomes.len()]).unwrap();
        let mut p = Population::new(g, fitness.to_vec(), d).unwrap();
        p.set_competition(fitness.to_vec()).unwrap();
        p
    }

    fn params(batch: usize) -> VariationParams {
        VariationParams { batch_size: batch, ..VariationParams::default() }
    }

    #[test]
    fn reproduce_contract() {
        let pop = pop_of(&[&[0.0, 1.0, 0.5], &[1.0, 0.0, 0.5]], &[1.0, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = reproduce(&pop, &VariationParams { iso_sigma: 0.5, line_sigma: 2.0, ..params(3) }, &mut rng).unwrap();
        assert_eq!((out.rows(), out.cols()), (3, 3));
        assert!(out.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn zero_noise_reproduces_parent() {
        let g: &[f64] = &[0.2, 0.7];
        let pop = pop_of(&[g, g], &[1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = VariationParams { iso_sigma: 0.0, line_sigma: 0.0, ..params(5) };
        let out = reproduce(&pop, &p, &mut rng).unwrap();
        assert!(out.iter_rows().all(|r| r == g));
    }

    #[test]
    fn reproduce_is_deterministic() {
        let pop = pop_of(&[&[0.1, 0.2], &[0.3, 0.9], &[0.5, 0.5]], &[3.0, 1.0, 2.0]);
        let a = reproduce(&pop, &params(8), &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = reproduce(&pop, &params(8), &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reproduce_draws_from_top_half_only() {
        // Zero noise: each child is a copy of its first parent.
        let pop = pop_of(&[&[0.0], &[0.25], &[0.5], &[0.75]], &[1.0, 4.0, 3.0, 2.0]);
        let p = VariationParams { iso_sigma: 0.0, line_sigma: 0.0, ..params(200) };
        let out = reproduce(&pop, &p, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(out.iter_rows().all(|r| r[0] == 0.25 || r[0] == 0.5));
        let raw = VariationParams { parent_gate: ParentGate::RawFitness, ..p };
        let mut gated = pop.clone();
        gated.set_competition(vec![9.0, 0.0, 0.0, 9.0]).unwrap();
        let out = reproduce(&gated, &raw, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(out.iter_rows().all(|r| r[0] == 0.25 || r[0] == 0.5));
    }

    #[test]
    fn reproduce_needs_two_parents() {
        let pop = pop_of(&[&[0.5]], &[1.0]);
        let err = reproduce(&pop, &params(1), &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert_eq!(err, QdError::InsufficientParents(1));
    }

    #[test]
    fn concat_appends_and_round_trips() {
        let pop = pop_of(&[&[0.1], &[0.2], &[0.3], &[0.4], &[0.5]], &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let batch = EvaluatedBatch {
            genomes: Matrix::from_rows(&[[0.6], [0.7], [0.8]]).unwrap(),
            fitness: vec![6.0, 7.0, 8.0],
            descriptors: Matrix::from_rows(&[[0.0], [0.0], [0.0]]).unwrap(),
            features: None,
        };
        let joined = concat(&pop, &batch).unwrap();
        assert_eq!(joined.len(), 8);
        let mut head = joined.subset(&[0, 1, 2, 3, 4]);
        head.set_competition(pop.competition().to_vec()).unwrap();
        assert_eq!(head, pop);

        let empty = EvaluatedBatch {
            genomes: Matrix::empty(1),
            fitness: vec![],
            descriptors: Matrix::empty(1),
            features: None,
        };
        assert_eq!(concat(&pop, &empty).unwrap(), pop);

        let wrong = EvaluatedBatch {
            genomes: Matrix::from_rows(&[[0.6, 0.1]]).unwrap(),
            fitness: vec![1.0],
            descriptors: Matrix::from_rows(&[[0.0]]).unwrap(),
            features: None,
        };
        assert!(concat(&pop, &wrong).is_err());
    }

    #[test]
    fn top_n_examples() {
        let inf = f64::INFINITY;
        let mut got = top_n_indices(&[inf, 3.0, -inf, 5.0], 2).unwrap();
        got.sort();
        assert_eq!(got, vec![0, 3]);
        assert_eq!(top_n_indices(&[1.0, 1.0, 1.0], 2).unwrap(), vec![0, 1]);
        assert_eq!(top_n_indices(&[inf, inf, inf], 2).unwrap(), vec![0, 1]);
        assert!(top_n_indices(&[1.0], 2).is_err());
    }

    #[test]
    fn select_full_size_is_identity() {
        let pop = pop_of(&[&[0.1], &[0.2], &[0.3]], &[1.0, 3.0, 2.0]);
        assert_eq!(select_top_n(&pop, 3).unwrap(), pop);
        let sel = select_top_n(&pop, 2).unwrap();
        assert_eq!(sel.fitness(), &[3.0, 2.0]);
    }
}
