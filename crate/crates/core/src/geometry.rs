//! Distances, exact nearest-neighbour queries, novelty scores and centroid
//! construction (CVT via Lloyd's algorithm, or uniform random).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{QdError, Result};
use crate::matrix::Matrix;

#[inline]
pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

/// Axis-aligned box in descriptor (or genome) space.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    low: Vec<f64>,
    high: Vec<f64>,
}

impl Bounds {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        if low.len() != high.len() {
            return Err(QdError::DimensionMismatch { expected: low.len(), actual: high.len() });
        }
        if low.is_empty() {
            return Err(QdError::InvalidParameter("bounds must have at least one dimension".into()));
        }
        for (l, h) in low.iter().zip(&high) {
            if !l.is_finite() || !h.is_finite() || l > h {
                return Err(QdError::InvalidParameter(format!("invalid interval [{l}, {h}]")));
            }
        }
        Ok(Self { low, high })
    }

    pub fn unit(dim: usize) -> Self {
        Self { low: vec![0.0; dim], high: vec![1.0; dim] }
    }

    /// Smallest box containing every row of `points`.
    pub fn enclosing(points: &Matrix) -> Result<Self> {
        if points.is_empty() {
            return Err(QdError::InvalidParameter("cannot bound an empty point set".into()));
        }
        let mut low = vec![f64::INFINITY; points.cols()];
        let mut high = vec![f64::NEG_INFINITY; points.cols()];
        for row in points.iter_rows() {
            for (d, &v) in row.iter().enumerate() {
                low[d] = low[d].min(v);
                high[d] = high[d].max(v);
            }
        }
        Self::new(low, high)
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point.iter().zip(self.low.iter().zip(&self.high)).all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    fn sample<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        for (d, slot) in out.iter_mut().enumerate() {
            let u: f64 = rng.random();
            *slot = self.low[d] + (self.high[d] - self.low[d]) * u;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Cvt,
    Random,
    DataDriven,
}

/// A set of `M` points partitioning descriptor space into Voronoi cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet {
    points: Matrix,
    provenance: Provenance,
    seed: u64,
}

impl CentroidSet {
    pub fn new(points: Matrix, provenance: Provenance, seed: u64) -> Result<Self> {
        if points.is_empty() {
            return Err(QdError::InvalidParameter("a centroid set needs at least one point".into()));
        }
        if !points.is_finite() {
            return Err(QdError::InvalidParameter("centroids must be finite".into()));
        }
        Ok(Self { points, provenance, seed })
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Index of the nearest centroid; ties go to the lower index.
    pub fn nearest(&self, point: &[f64]) -> usize {
        nearest_row(&self.points, point).0
    }

    /// Nearest-centroid assignment for every row of `points`.
    pub fn assign(&self, points: &Matrix) -> Result<Vec<usize>> {
        if points.rows() > 0 && points.cols() != self.dim() {
            return Err(QdError::DimensionMismatch { expected: self.dim(), actual: points.cols() });
        }
        Ok(points.iter_rows().map(|p| self.nearest(p)).collect())
    }
}

/// Returns `(index, squared distance)` of the row of `rows` closest to `point`.
fn nearest_row(rows: &Matrix, point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in rows.iter_rows().enumerate() {
        let d = squared_euclidean(row, point);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Full `P x Q` Euclidean distance matrix between the rows of `a` and `b`.
pub fn pairwise_distances(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows() > 0 && b.rows() > 0 && a.cols() != b.cols() {
        return Err(QdError::DimensionMismatch { expected: a.cols(), actual: b.cols() });
    }
    let mut out = Matrix::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        let ai = a.row(i);
        for (j, slot) in out.row_mut(i).iter_mut().enumerate() {
            *slot = euclidean(ai, b.row(j));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// Orders neighbours by ascending distance, breaking ties by lower index.
pub(crate) fn by_distance_then_index(a: &Neighbor, b: &Neighbor) -> std::cmp::Ordering {
    a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index))
}

/// Keeps the `k` nearest of `candidates` sorted ascending.
pub(crate) fn retain_k_nearest(candidates: &mut Vec<Neighbor>, k: usize) {
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, by_distance_then_index);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(by_distance_then_index);
}

/// Exact k-nearest-neighbour search by brute force.
///
/// For every query index, returns up to `k` neighbours among the rows `j`
/// for which `eligible(query, j)` holds. The query itself is never included.
/// Output is sorted by ascending distance with ties broken by lower index.
pub fn k_nearest<F>(queries: &[usize], points: &Matrix, k: usize, eligible: F) -> Vec<Vec<Neighbor>>
where
    F: Fn(usize, usize) -> bool,
{
    assert!(k >= 1, "k must be at least 1");
    queries
        .iter()
        .map(|&q| {
            let origin = points.row(q);
            let mut candidates: Vec<Neighbor> = (0..points.rows())
                .filter(|&j| j != q && eligible(q, j))
                .map(|j| Neighbor { index: j, distance: euclidean(origin, points.row(j)) })
                .collect();
            retain_k_nearest(&mut candidates, k);
            candidates
        })
        .collect()
}

/// Mean of neighbour distances, summed in ascending order.
pub(crate) fn mean_distance(neighbors: &[Neighbor]) -> f64 {
    let sum: f64 = neighbors.iter().map(|n| n.distance).sum();
    sum / neighbors.len() as f64
}

/// Mean distance from each point to its `min(k, N - 1)` nearest others.
pub fn novelty_score(points: &Matrix, k: usize) -> Result<Vec<f64>> {
    if points.rows() < 2 {
        return Err(QdError::InvalidParameter(format!(
            "novelty needs at least 2 points, got {}",
            points.rows()
        )));
    }
    if k == 0 {
        return Err(QdError::InvalidParameter("novelty k must be at least 1".into()));
    }
    let queries: Vec<usize> = (0..points.rows()).collect();
    Ok(k_nearest(&queries, points, k, |_, _| true).iter().map(|n| mean_distance(n)).collect())
}

pub fn random_centroids(cells: usize, bounds: &Bounds, seed: u64) -> Result<CentroidSet> {
    if cells == 0 {
        return Err(QdError::InvalidParameter("number of centroids must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Matrix::zeros(cells, bounds.dim());
    for i in 0..cells {
        bounds.sample(&mut rng, points.row_mut(i));
    }
    CentroidSet::new(points, Provenance::Random, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvtParams {
    pub cells: usize,
    pub sample_count: usize,
    pub lloyd_iters: usize,
    /// Stop once the relative energy improvement drops below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl CvtParams {
    pub fn new(cells: usize, seed: u64) -> Self {
        Self { cells, sample_count: 50 * cells, lloyd_iters: 100, tolerance: 1e-9, seed }
    }
}

#[derive(Debug, Clone)]
pub struct CvtOutcome {
    pub centroids: CentroidSet,
    /// Quantization energy (sum of squared sample-to-centroid distances)
    /// after each assignment step, starting with the seeded centroids.
    pub energy: Vec<f64>,
}

pub fn cvt_centroids(bounds: &Bounds, params: &CvtParams) -> Result<CentroidSet> {
    cvt_with_trace(bounds, params).map(|o| o.centroids)
}

/// Lloyd's algorithm on uniform samples of `bounds`, seeded k-means++ style.
pub fn cvt_with_trace(bounds: &Bounds, params: &CvtParams) -> Result<CvtOutcome> {
    let m = params.cells;
    if m == 0 {
        return Err(QdError::InvalidParameter("number of centroids must be at least 1".into()));
    }
    if m > params.sample_count {
        return Err(QdError::InvalidParameter(format!(
            "{m} centroids requested from only {} samples",
            params.sample_count
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let dim = bounds.dim();
    let mut samples = Matrix::zeros(params.sample_count, dim);
    for i in 0..params.sample_count {
        bounds.sample(&mut rng, samples.row_mut(i));
    }
    let mut centroids = kmeans_plus_plus(&samples, m, &mut rng);

    let mut assignment = vec![0usize; samples.rows()];
    let mut sq_dist = vec![0.0f64; samples.rows()];
    let mut energy = vec![assign(&samples, &centroids, &mut assignment, &mut sq_dist)];

    for _ in 0..params.lloyd_iters {
        let previous = centroids.clone();
        let mut sums = Matrix::zeros(m, dim);
        let mut counts = vec![0usize; m];
        for (s, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            for (acc, v) in sums.row_mut(c).iter_mut().zip(samples.row(s)) {
                *acc += v;
            }
        }
        let mut taken = vec![false; samples.rows()];
        for c in 0..m {
            if counts[c] > 0 {
                let n = counts[c] as f64;
                for (d, (dst, acc)) in centroids.row_mut(c).iter_mut().zip(sums.row(c)).enumerate() {
                    *dst = (acc / n).clamp(bounds.low()[d], bounds.high()[d]);
                }
            } else {
                // Empty cell: move it onto the sample worst served by the current centroids.
                let far = (0..samples.rows())
                    .filter(|&s| !taken[s])
                    .fold(None, |best: Option<usize>, s| match best {
                        Some(b) if sq_dist[b] >= sq_dist[s] => Some(b),
                        _ => Some(s),
                    })
                    .expect("sample_count >= cells");
                taken[far] = true;
                centroids.row_mut(c).copy_from_slice(samples.row(far));
            }
        }
        let e = assign(&samples, &centroids, &mut assignment, &mut sq_dist);
        let prev = *energy.last().expect("non-empty");
        if e > prev {
            // Only rounding can raise the energy here; keep the better centroids.
            centroids = previous;
            break;
        }
        energy.push(e);
        if prev <= 0.0 || (prev - e) / prev < params.tolerance {
            break;
        }
    }

    Ok(CvtOutcome { centroids: CentroidSet::new(centroids, Provenance::Cvt, params.seed)?, energy })
}

fn assign(samples: &Matrix, centroids: &Matrix, assignment: &mut [usize], sq_dist: &mut [f64]) -> f64 {
    let mut energy = 0.0;
    for (s, sample) in samples.iter_rows().enumerate() {
        let (c, d) = nearest_row(centroids, sample);
        assignment[s] = c;
        sq_dist[s] = d;
        energy += d;
    }
    energy
}

fn kmeans_plus_plus<R: Rng>(samples: &Matrix, m: usize, rng: &mut R) -> Matrix {
    let n = samples.rows();
    let mut centroids = Matrix::empty(samples.cols());
    let first = rng.random_range(0..n);
    centroids.push_row(samples.row(first)).expect("same dim");
    let mut best: Vec<f64> = samples.iter_rows().map(|s| squared_euclidean(s, samples.row(first))).collect();
    while centroids.rows() < m {
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in best.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.push_row(samples.row(pick)).expect("same dim");
        let newest = centroids.row(centroids.rows() - 1).to_vec();
        for (i, slot) in best.iter_mut().enumerate() {
            *slot = slot.min(squared_euclidean(samples.row(i), &newest));
        }
    }
    centroids
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn pairwise_small_cases() {
        let a = m(&[&[0.0], &[3.0]]);
        assert_eq!(pairwise_distances(&a, &a).unwrap().to_rows(), vec![vec![0.0, 3.0], vec![3.0, 0.0]]);
        let d = pairwise_distances(&m(&[&[0.0, 0.0]]), &m(&[&[3.0, 4.0]])).unwrap();
        assert_eq!(d.row(0), &[5.0]);
        let same = pairwise_distances(&m(&[&[1.5, -2.0]]), &m(&[&[1.5, -2.0]])).unwrap();
        assert_eq!(same.row(0), &[0.0]);
        assert!(pairwise_distances(&m(&[&[0.0]]), &m(&[&[0.0, 1.0]])).is_err());
    }

    #[test]
    fn k_nearest_examples() {
        let pts = m(&[&[0.0], &[1.0], &[3.0]]);
        let got = k_nearest(&[2], &pts, 2, |_, _| true);
        assert_eq!(got[0], vec![Neighbor { index: 1, distance: 2.0 }, Neighbor { index: 0, distance: 3.0 }]);
        assert!(k_nearest(&[2], &pts, 2, |_, _| false)[0].is_empty());
        assert_eq!(k_nearest(&[0], &pts, 10, |_, _| true)[0].len(), 2);
    }

    #[test]
    fn k_nearest_breaks_ties_by_index() {
        let pts = m(&[&[0.0], &[-1.0], &[1.0], &[2.0]]);
        let got = k_nearest(&[0], &pts, 1, |_, _| true);
        assert_eq!(got[0][0].index, 1);
    }

    #[test]
    fn novelty_examples() {
        assert_eq!(novelty_score(&m(&[&[0.0], &[4.0]]), 1).unwrap(), vec![4.0, 4.0]);
        assert_eq!(novelty_score(&m(&[&[0.0], &[1.0], &[2.0]]), 2).unwrap(), vec![1.5, 1.0, 1.5]);
        assert_eq!(novelty_score(&m(&[&[7.0, 7.0][..]; 4]), 3).unwrap(), vec![0.0; 4]);
        assert!(novelty_score(&m(&[&[0.0]]), 1).is_err());
    }

    #[test]
    fn cvt_single_cell_is_sample_mean() {
        let c = cvt_centroids(&Bounds::unit(2), &CvtParams { sample_count: 10_000, ..CvtParams::new(1, 7) }).unwrap();
        let p = c.points().row(0);
        assert!((p[0] - 0.5).abs() < 0.02 && (p[1] - 0.5).abs() < 0.02, "{p:?}");
    }

    #[test]
    fn cvt_unit_interval_two_cells() {
        let params = CvtParams { sample_count: 10_000, lloyd_iters: 50, ..CvtParams::new(2, 3) };
        let c = cvt_centroids(&Bounds::unit(1), &params).unwrap();
        let mut xs: Vec<f64> = c.points().iter_rows().map(|r| r[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] - 0.25).abs() < 0.03 && (xs[1] - 0.75).abs() < 0.03, "{xs:?}");
    }

    #[test]
    fn cvt_degenerate_box_collapses() {
        let b = Bounds::new(vec![0.3, 0.3], vec![0.3, 0.3]).unwrap();
        let c = cvt_centroids(&b, &CvtParams::new(4, 1)).unwrap();
        assert!(c.points().iter_rows().all(|r| r == [0.3, 0.3]));
    }

    #[test]
    fn cvt_rejects_more_cells_than_samples() {
        let p = CvtParams { sample_count: 3, ..CvtParams::new(4, 0) };
        assert!(cvt_centroids(&Bounds::unit(2), &p).is_err());
    }

    #[test]
    fn random_centroids_contract() {
        let b = Bounds::unit(3);
        let a = random_centroids(5, &b, 11).unwrap();
        assert_eq!(a, random_centroids(5, &b, 11).unwrap());
        assert_eq!(a.len(), 5);
        assert!(a.points().iter_rows().all(|r| b.contains(r)));
        let flat = Bounds::new(vec![0.0, 2.0], vec![1.0, 2.0]).unwrap();
        let c = random_centroids(20, &flat, 5).unwrap();
        assert!(c.points().iter_rows().all(|r| r[1] == 2.0));
    }

    fn points_strategy(max_rows: usize) -> impl Strategy<Value = Matrix> {
        (1usize..=4, 2usize..=max_rows).prop_flat_map(|(dim, rows)| {
            proptest::collection::vec(-10.0f64..10.0, dim * rows)
                .prop_map(move |data| Matrix::from_vec(rows, dim, data).unwrap())
        })
    }

    proptest! {
        #[test]
        fn distances_are_a_metric(pts in points_strategy(12)) {
            let d = pairwise_distances(&pts, &pts).unwrap();
            let n = pts.rows();
            for i in 0..n {
                prop_assert_eq!(d.row(i)[i], 0.0);
                for j in 0..n {
                    prop_assert_eq!(d.row(i)[j], d.row(j)[i]);
                    prop_assert!(d.row(i)[j] >= 0.0);
                    for k in 0..n {
                        prop_assert!(d.row(i)[k] <= d.row(i)[j] + d.row(j)[k] + 1e-12);
                    }
                }
            }
        }

        #[test]
        fn k_nearest_matches_full_sort(pts in points_strategy(500), k in 1usize..20, q in 0usize..500) {
            let q = q % pts.rows();
            let got = &k_nearest(&[q], &pts, k, |_, j| j % 3 != 1)[0];
            let mut all: Vec<(f64, usize)> = (0..pts.rows())
                .filter(|&j| j != q && j % 3 != 1)
                .map(|j| (euclidean(pts.row(q), pts.row(j)), j))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            all.truncate(k);
            let got: Vec<(f64, usize)> = got.iter().map(|n| (n.distance, n.index)).collect();
            prop_assert_eq!(got, all);
        }
    }
}
