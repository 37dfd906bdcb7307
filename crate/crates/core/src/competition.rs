//! Local competition functions.
//!
//! Each function maps raw fitness and descriptors of the combined
//! (parents + offspring) population to a competition fitness used for
//! truncation selection. Values may be `+inf` (always kept first) or `-inf`
//! (eliminated unless the population would otherwise be short).

use crate::error::{QdError, Result};
use crate::geometry::{euclidean, mean_distance, retain_k_nearest, CentroidSet, Neighbor, Provenance};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DnsParams {
    /// Number of nearest fitter solutions averaged.
    pub k: usize,
}

impl Default for DnsParams {
    fn default() -> Self {
        Self { k: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeParams {
    /// Distance threshold below which two solutions compete.
    pub l: f64,
    /// Neighbourhood size of the novelty score.
    pub k_nov: usize,
}

fn check_inputs(fitness: &[f64], descriptors: &Matrix) -> Result<()> {
    if fitness.len() != descriptors.rows() {
        return Err(QdError::DimensionMismatch { expected: fitness.len(), actual: descriptors.rows() });
    }
    if fitness.iter().any(|f| f.is_nan()) {
        return Err(QdError::NotANumber("fitness"));
    }
    if descriptors.has_nan() {
        return Err(QdError::NotANumber("descriptors"));
    }
    Ok(())
}

/// Dominated novelty score.
///
/// For each solution, the mean descriptor distance to its `k` nearest
/// strictly fitter solutions (all of them when fewer than `k` exist).
/// Solutions with no fitter solution get `+inf`.
pub fn dns_competition(fitness: &[f64], descriptors: &Matrix, params: DnsParams) -> Result<Vec<f64>> {
    check_inputs(fitness, descriptors)?;
    if params.k == 0 {
        return Err(QdError::InvalidParameter("DNS k must be at least 1".into()));
    }
    let n = fitness.len();
    // Fitter sets are prefixes of the population sorted by descending fitness.
    let mut by_fitness: Vec<usize> = (0..n).collect();
    by_fitness.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));

    let mut candidates = Vec::with_capacity(n);
    let scores = (0..n)
        .map(|i| {
            let fitter = by_fitness.partition_point(|&j| fitness[j] > fitness[i]);
            if fitter == 0 {
                return f64::INFINITY;
            }
            let origin = descriptors.row(i);
            candidates.clear();
            candidates.extend(
                by_fitness[..fitter]
                    .iter()
                    .map(|&j| Neighbor { index: j, distance: euclidean(origin, descriptors.row(j)) }),
            );
            retain_k_nearest(&mut candidates, params.k);
            mean_distance(&candidates)
        })
        .collect();
    Ok(scores)
}

/// Grid competition: only the fittest solution of each centroid's cell keeps
/// its fitness; every other solution gets `-inf`. Fitness ties go to the
/// lower index.
pub fn me_competition(fitness: &[f64], descriptors: &Matrix, centroids: &CentroidSet) -> Result<Vec<f64>> {
    check_inputs(fitness, descriptors)?;
    if !fitness.is_empty() && descriptors.cols() != centroids.dim() {
        return Err(QdError::DimensionMismatch { expected: centroids.dim(), actual: descriptors.cols() });
    }
    let cells = centroids.assign(descriptors)?;
    let mut elite: Vec<Option<usize>> = vec![None; centroids.len()];
    for (i, &c) in cells.iter().enumerate() {
        match elite[c] {
            Some(e) if fitness[e] >= fitness[i] => {}
            _ => elite[c] = Some(i),
        }
    }
    let mut scores = vec![f64::NEG_INFINITY; fitness.len()];
    for e in elite.into_iter().flatten() {
        scores[e] = fitness[e];
    }
    Ok(scores)
}

/// Unstructured-archive competition with a distance threshold.
///
/// Solutions are visited in index order as if inserted one by one into an
/// archive. A solution farther than `l` from every surviving predecessor is
/// kept. Otherwise it challenges its nearest surviving predecessor and takes
/// its place only if it is at least as fit and at least as novel, strictly
/// better on one of the two. Novelty is measured among surviving
/// predecessors plus the challenger.
pub fn te_competition(fitness: &[f64], descriptors: &Matrix, params: TeParams) -> Result<Vec<f64>> {
    check_inputs(fitness, descriptors)?;
    if !(params.l > 0.0) {
        return Err(QdError::InvalidParameter("threshold l must be positive".into()));
    }
    if params.k_nov == 0 {
        return Err(QdError::InvalidParameter("novelty k must be at least 1".into()));
    }
    let n = fitness.len();
    let mut scores = vec![f64::NEG_INFINITY; n];
    let mut living: Vec<usize> = Vec::with_capacity(n);

    for i in 0..n {
        let di = descriptors.row(i);
        let nearest = living
            .iter()
            .map(|&j| Neighbor { index: j, distance: euclidean(di, descriptors.row(j)) })
            .min_by(crate::geometry::by_distance_then_index);
        let Some(nearest) = nearest.filter(|nb| nb.distance <= params.l) else {
            scores[i] = fitness[i];
            living.push(i);
            continue;
        };
        let j = nearest.index;
        let novelty = |x: usize| {
            let origin = descriptors.row(x);
            let mut pool: Vec<Neighbor> = living
                .iter()
                .copied()
                .chain(std::iter::once(i))
                .filter(|&y| y != x)
                .map(|y| Neighbor { index: y, distance: euclidean(origin, descriptors.row(y)) })
                .collect();
            retain_k_nearest(&mut pool, params.k_nov);
            mean_distance(&pool)
        };
        let (nov_i, nov_j) = (novelty(i), novelty(j));
        let (fi, fj) = (fitness[i], fitness[j]);
        if fi >= fj && nov_i >= nov_j && (fi > fj || nov_i > nov_j) {
            scores[i] = fi;
            scores[j] = f64::NEG_INFINITY;
            let pos = living.iter().position(|&x| x == j).expect("j is living");
            living.remove(pos);
            living.push(i);
        }
    }
    Ok(scores)
}

/// Centroid subpopulation kept by Cluster-Elites between generations.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterElitesState {
    cells: usize,
    centroid_indices: Vec<usize>,
    centroids: Option<CentroidSet>,
}

impl ClusterElitesState {
    pub fn new(cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(QdError::InvalidParameter("Cluster-Elites needs at least one centroid".into()));
        }
        Ok(Self { cells, centroid_indices: Vec::new(), centroids: None })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Indices, into the last scored population, of the centroid members.
    pub fn centroid_indices(&self) -> &[usize] {
        &self.centroid_indices
    }

    pub fn centroids(&self) -> Option<&CentroidSet> {
        self.centroids.as_ref()
    }
}

/// Greedy max-min (farthest point) selection of `m` rows, starting from row 0.
/// Ties go to the lower index.
pub fn farthest_point_selection(points: &Matrix, m: usize) -> Vec<usize> {
    let n = points.rows();
    let m = m.min(n);
    if m == 0 {
        return Vec::new();
    }
    let mut chosen = vec![0];
    let mut is_chosen = vec![false; n];
    is_chosen[0] = true;
    let mut min_dist: Vec<f64> = (0..n).map(|i| euclidean(points.row(i), points.row(0))).collect();
    while chosen.len() < m {
        let mut best: Option<usize> = None;
        for i in (0..n).filter(|&i| !is_chosen[i]) {
            if best.is_none_or(|b| min_dist[i] > min_dist[b]) {
                best = Some(i);
            }
        }
        let next = best.expect("m <= n");
        is_chosen[next] = true;
        chosen.push(next);
        for i in 0..n {
            let d = euclidean(points.row(i), points.row(next));
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }
    chosen
}

/// Cluster-Elites competition (max-min variant).
///
/// The `M` most spread-out solutions become the centroid subpopulation and
/// are kept with `+inf`. The remaining solutions compete for the Voronoi
/// cells those centroids define, one elite per cell.
pub fn cluster_elites_competition(
    fitness: &[f64],
    descriptors: &Matrix,
    state: &ClusterElitesState,
) -> Result<(Vec<f64>, ClusterElitesState)> {
    check_inputs(fitness, descriptors)?;
    if fitness.is_empty() {
        return Err(QdError::InvalidParameter("Cluster-Elites needs a non-empty population".into()));
    }
    let centroid_indices = farthest_point_selection(descriptors, state.cells);
    let centroids = CentroidSet::new(descriptors.select_rows(&centroid_indices), Provenance::DataDriven, 0)?;

    let mut is_centroid = vec![false; fitness.len()];
    for &c in &centroid_indices {
        is_centroid[c] = true;
    }
    let competitors: Vec<usize> = (0..fitness.len()).filter(|&i| !is_centroid[i]).collect();
    let sub_fitness: Vec<f64> = competitors.iter().map(|&i| fitness[i]).collect();
    let sub_scores = me_competition(&sub_fitness, &descriptors.select_rows(&competitors), &centroids)?;

    let mut scores = vec![f64::INFINITY; fitness.len()];
    for (&i, s) in competitors.iter().zip(sub_scores) {
        scores[i] = s;
    }
    let next = ClusterElitesState { cells: state.cells, centroid_indices, centroids: Some(centroids) };
    Ok((scores, next))
}

/// The competition step of the generation loop.
#[derive(Debug, Clone)]
pub enum Competition {
    Dns(DnsParams),
    MapElites(CentroidSet),
    ThresholdElites(TeParams),
    ClusterElites(ClusterElitesState),
    /// No local competition: competition fitness is raw fitness.
    PlainGa,
}

impl Competition {
    pub fn name(&self) -> &'static str {
        match self {
            Competition::Dns(_) => "dns",
            Competition::MapElites(_) => "map_elites",
            Competition::ThresholdElites(_) => "threshold_elites",
            Competition::ClusterElites(_) => "cluster_elites",
            Competition::PlainGa => "plain_ga",
        }
    }

    pub fn apply(&mut self, fitness: &[f64], descriptors: &Matrix) -> Result<Vec<f64>> {
        match self {
            Competition::Dns(p) => dns_competition(fitness, descriptors, *p),
            Competition::MapElites(c) => me_competition(fitness, descriptors, c),
            Competition::ThresholdElites(p) => te_competition(fitness, descriptors, *p),
            Competition::ClusterElites(state) => {
                let (scores, next) = cluster_elites_competition(fitness, descriptors, state)?;
                *state = next;
                Ok(scores)
            }
            Competition::PlainGa => {
                check_inputs(fitness, descriptors)?;
                Ok(fitness.to_vec())
            }
        }
    }
}
