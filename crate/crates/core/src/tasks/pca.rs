//! Learned low-dimensional descriptors: a PCA projection of raw behaviour
//! (e.g. sampled trajectories), refit periodically on the current population.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{QdError, Result};
use crate::matrix::Matrix;

/// Eigenvalues below this fraction of the largest count as zero variance.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaDescriptorState {
    latent_dim: usize,
    refit_period: usize,
    mean: Vec<f64>,
    /// `latent_dim x raw_dim`, orthonormal rows.
    directions: Matrix,
    buffer: Matrix,
    rank: usize,
}

impl PcaDescriptorState {
    /// Unfitted state; `encode` fails until the first `refit`.
    pub fn new(latent_dim: usize, refit_period: usize) -> Result<Self> {
        if latent_dim == 0 {
            return Err(QdError::InvalidParameter("latent dimension must be at least 1".into()));
        }
        if refit_period == 0 {
            return Err(QdError::InvalidParameter("refit period must be at least 1".into()));
        }
        Ok(Self {
            latent_dim,
            refit_period,
            mean: Vec::new(),
            directions: Matrix::empty(0),
            buffer: Matrix::empty(0),
            rank: 0,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn refit_period(&self) -> usize {
        self.refit_period
    }

    pub fn is_fitted(&self) -> bool {
        !self.mean.is_empty()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn directions(&self) -> &Matrix {
        &self.directions
    }

    pub fn buffer(&self) -> &Matrix {
        &self.buffer
    }

    /// Number of directions carrying non-zero variance at the last refit.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Recomputes mean and principal directions from `raw` (one row per
    /// individual). When the data has fewer than `latent_dim` directions of
    /// non-zero variance the remaining directions come from the orthonormal
    /// eigenbasis completion and a warning is logged.
    pub fn refit(&self, raw: &Matrix) -> Result<Self> {
        let (n, dim) = (raw.rows(), raw.cols());
        if n < self.latent_dim {
            return Err(QdError::InvalidParameter(format!(
                "PCA refit needs at least {} rows, got {n}",
                self.latent_dim
            )));
        }
        if dim < self.latent_dim {
            return Err(QdError::InvalidParameter(format!(
                "latent dimension {} exceeds raw dimension {dim}",
                self.latent_dim
            )));
        }
        if !raw.is_finite() {
            return Err(QdError::NotANumber("PCA input"));
        }
        let mut mean = vec![0.0; dim];
        for row in raw.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        for row in raw.iter_rows() {
            let centred: Vec<f64> = row.iter().zip(&mean).map(|(v, m)| v - m).collect();
            for a in 0..dim {
                for b in a..dim {
                    cov[(a, b)] += centred[a] * centred[b];
                }
            }
        }
        for a in 0..dim {
            for b in a..dim {
                cov[(a, b)] /= n as f64;
                cov[(b, a)] = cov[(a, b)];
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = eig.eigenvalues[order[0]].max(0.0);
        let rank = order.iter().filter(|&&i| eig.eigenvalues[i] > RANK_TOLERANCE * top.max(f64::MIN_POSITIVE)).count();
        if rank < self.latent_dim {
            log::warn!(
                "PCA refit is rank-deficient: {rank} informative directions for latent dimension {}",
                self.latent_dim
            );
        }
        let mut directions = Matrix::zeros(self.latent_dim, dim);
        for (r, &i) in order.iter().take(self.latent_dim).enumerate() {
            let v = eig.eigenvectors.column(i);
            // Fix the sign so the largest-magnitude component is positive.
            let pivot = (0..dim).fold(0, |best, d| if v[d].abs() > v[best].abs() { d } else { best });
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            for (d, slot) in directions.row_mut(r).iter_mut().enumerate() {
                *slot = sign * v[d];
            }
        }
        Ok(Self {
            latent_dim: self.latent_dim,
            refit_period: self.refit_period,
            mean,
            directions,
            buffer: raw.clone(),
            rank: rank.min(self.latent_dim),
        })
    }

    /// Projects raw rows onto the fitted directions.
    pub fn encode(&self, raw: &Matrix) -> Result<Matrix> {
        if !self.is_fitted() {
            return Err(QdError::InvalidParameter("PCA encoder used before fitting".into()));
        }
        if raw.rows() > 0 && raw.cols() != self.mean.len() {
            return Err(QdError::DimensionMismatch { expected: self.mean.len(), actual: raw.cols() });
        }
        let mut out = Matrix::zeros(raw.rows(), self.latent_dim);
        for (i, row) in raw.iter_rows().enumerate() {
            for (r, slot) in out.row_mut(i).iter_mut().enumerate() {
                *slot = self
                    .directions
                    .row(r)
                    .iter()
                    .zip(row.iter().zip(&self.mean))
                    .map(|(w, (v, m))| w * (v - m))
                    .sum();
            }
        }
        Ok(out)
    }
}

/// Convenience form of [`PcaDescriptorState::refit`].
pub fn pca_refit(state: &PcaDescriptorState, raw: &Matrix) -> Result<PcaDescriptorState> {
    state.refit(raw)
}
