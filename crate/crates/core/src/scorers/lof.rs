//! Local outlier factor in novelty mode: the training set is fixed at fit
//! time and queries are scored against it without being inserted.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::knn::smallest_k;
use crate::store::{EmbeddingMatrix, StoredMatrix};

/// Lower bound on the mean reachability distance before inversion.
pub const LRD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LofModel {
    reference: EmbeddingMatrix,
    k: usize,
    k_distance: Vec<f64>,
    lrd: Vec<f64>,
}

fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

impl LofModel {
    pub fn fit(train: EmbeddingMatrix, k: usize) -> Result<Self> {
        if k == 0 || k >= train.rows() {
            return Err(Error::Config(format!(
                "LOF k must be in 1..={} for {} training rows, got {k}",
                train.rows().saturating_sub(1),
                train.rows()
            )));
        }
        let n = train.rows();
        // Neighbors of each training row, excluding the row itself.
        let neighbors: Vec<Vec<(f64, usize)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let xi = train.row(i);
                let others = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (euclidean(xi, train.row(j)), j));
                smallest_k(others, k)
            })
            .collect();
        let k_distance: Vec<f64> = neighbors.iter().map(|nb| nb[k - 1].0).collect();
        let lrd = neighbors
            .iter()
            .map(|nb| local_reachability_density(nb, &k_distance))
            .collect();
        Ok(Self {
            reference: train,
            k,
            k_distance,
            lrd,
        })
    }

    pub fn reference(&self) -> &EmbeddingMatrix {
        &self.reference
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn k_distances(&self) -> &[f64] {
        &self.k_distance
    }

    pub fn lrd(&self) -> &[f64] {
        &self.lrd
    }

    /// LOF of `q` relative to the training set; 1 means "as dense as its
    /// neighbors", larger means more outlying.
    pub fn local_outlier_factor(&self, q: &[f32]) -> f64 {
        let all = (0..self.reference.rows()).map(|j| (euclidean(q, self.reference.row(j)), j));
        let nb = smallest_k(all, self.k);
        let lrd_q = local_reachability_density(&nb, &self.k_distance);
        let mean_neighbor_lrd = nb.iter().map(|&(_, o)| self.lrd[o]).sum::<f64>() / nb.len() as f64;
        mean_neighbor_lrd / lrd_q
    }

    pub fn score(&self, q: &[f32]) -> f64 {
        -self.local_outlier_factor(q)
    }
}

fn local_reachability_density(neighbors: &[(f64, usize)], k_distance: &[f64]) -> f64 {
    let mean_reach = neighbors
        .iter()
        .map(|&(d, o)| d.max(k_distance[o]))
        .sum::<f64>()
        / neighbors.len() as f64;
    1.0 / mean_reach.max(LRD_FLOOR)
}
