use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{EmbeddingMatrix, StoredMatrix};

/// Principal subspace of the training data; scores by negated squared
/// reconstruction error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// One principal direction per entry, unit length, ordered by
    /// decreasing explained variance.
    components: Vec<Vec<f64>>,
    explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn fit(train: &EmbeddingMatrix, n_components: usize) -> Result<Self> {
        let (n, d) = (train.rows(), train.cols());
        if n_components == 0 || n_components > d {
            return Err(Error::Config(format!(
                "n_components must be in 1..={d}, got {n_components}"
            )));
        }
        let mut mean = vec![0.0f64; d];
        for i in 0..n {
            for (m, &v) in mean.iter_mut().zip(train.row(i)) {
                *m += f64::from(v);
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        let mut cov = DMatrix::<f64>::zeros(d, d);
        let mut centered = vec![0.0f64; d];
        for i in 0..n {
            for ((c, &v), m) in centered.iter_mut().zip(train.row(i)).zip(&mean) {
                *c = f64::from(v) - m;
            }
            for a in 0..d {
                let ca = centered[a];
                for b in a..d {
                    cov[(a, b)] += ca * centered[b];
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                let v = cov[(a, b)] / n as f64;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }

        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(a.cmp(&b))
        });
        let components = order[..n_components]
            .iter()
            .map(|&j| {
                let mut v: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
                // Sign convention: largest-magnitude entry positive.
                let pivot = v
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                if v[pivot] < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
                v
            })
            .collect();
        let explained_variance = order[..n_components]
            .iter()
            .map(|&j| eig.eigenvalues[j].max(0.0))
            .collect();
        Ok(Self {
            mean,
            components,
            explained_variance,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn reconstruction_error(&self, q: &[f32]) -> f64 {
        let mut residual: Vec<f64> = q
            .iter()
            .zip(&self.mean)
            .map(|(&v, m)| f64::from(v) - m)
            .collect();
        let coeffs: Vec<f64> = self
            .components
            .iter()
            .map(|p| p.iter().zip(&residual).map(|(a, b)| a * b).sum())
            .collect();
        for (p, c) in self.components.iter().zip(coeffs) {
            for (r, &pv) in residual.iter_mut().zip(p) {
                *r -= c * pv;
            }
        }
        residual.iter().map(|r| r * r).sum()
    }

    pub fn score(&self, q: &[f32]) -> f64 {
        -self.reconstruction_error(q)
    }
}
