//! Exact Euclidean k-nearest-neighbor search over unit-normalized rows.
//!
//! Storage is `f32`; every distance is accumulated in `f64` as
//! `sqrt(max(0, |z|² + |q|² − 2⟨z, q⟩))`. Top-k selection keeps a bounded
//! max-heap per query. Ties on distance go to the lower reference index, so
//! results are identical however the batch is split across threads.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{row_norm, EmbeddingMatrix, StoredMatrix, NORM_TOLERANCE};

/// The `k` nearest reference rows to one query, nearest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborList {
    pub distances: Vec<f64>,
    pub indices: Vec<usize>,
}

impl NeighborList {
    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    /// Distance to the farthest of the returned neighbors, i.e. `d_k`.
    pub fn kth_distance(&self) -> f64 {
        *self.distances.last().expect("neighbor list is never empty")
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    key: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then(self.index.cmp(&other.index))
    }
}

/// Immutable search structure over the in-distribution training rows.
#[derive(Debug, Clone)]
pub struct KnnIndex {
    reference: EmbeddingMatrix,
    sq_norms: Vec<f64>,
    k_max: usize,
}

impl KnnIndex {
    pub fn build(train: EmbeddingMatrix, k_max: usize) -> Result<Self> {
        if !train.is_normalized() {
            return Err(Error::Validation(
                "kNN reference rows must be L2-normalized".into(),
            ));
        }
        if k_max == 0 || k_max > train.rows() {
            return Err(Error::Config(format!(
                "k_max must be in 1..={}, got {k_max}",
                train.rows()
            )));
        }
        let sq_norms = (0..train.rows())
            .map(|i| {
                let n = row_norm(train.row(i));
                n * n
            })
            .collect();
        Ok(Self {
            reference: train,
            sq_norms,
            k_max,
        })
    }

    pub fn reference(&self) -> &EmbeddingMatrix {
        &self.reference
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn dim(&self) -> usize {
        self.reference.cols()
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.k_max {
            return Err(Error::Config(format!(
                "k must be in 1..={}, got {k}",
                self.k_max
            )));
        }
        Ok(())
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::Shape(format!(
                "query has {got} dimensions, index has {}",
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn query(&self, q: &[f32], k: usize) -> Result<NeighborList> {
        self.check_dim(q.len())?;
        self.check_k(k)?;
        let n = row_norm(q);
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Validation(format!(
                "query has L2 norm {n}, expected a unit vector"
            )));
        }
        Ok(self.search(q, k))
    }

    /// Queries every row of a normalized matrix, in row order.
    pub fn batch_query(&self, queries: &EmbeddingMatrix, k: usize) -> Result<Vec<NeighborList>> {
        if !queries.is_normalized() {
            return Err(Error::Validation("query rows must be L2-normalized".into()));
        }
        self.check_dim(queries.cols())?;
        self.query_rows(queries.as_slice(), k)
    }

    /// Queries a flat row-major block of unit vectors. An empty block gives
    /// an empty result. Rows are not re-checked for unit norm.
    pub fn query_rows(&self, data: &[f32], k: usize) -> Result<Vec<NeighborList>> {
        self.check_k(k)?;
        let d = self.dim();
        if !data.len().is_multiple_of(d) {
            return Err(Error::Shape(format!(
                "{} values do not split into rows of {d}",
                data.len()
            )));
        }
        Ok(data.par_chunks(d).map(|q| self.search(q, k)).collect())
    }

    fn search(&self, q: &[f32], k: usize) -> NeighborList {
        let q_sq: f64 = q.iter().map(|&v| f64::from(v) * f64::from(v)).sum();
        let candidates = self.sq_norms.iter().enumerate().map(|(index, &z_sq)| {
            let dot: f64 = self
                .reference
                .row(index)
                .iter()
                .zip(q)
                .map(|(&a, &b)| f64::from(a) * f64::from(b))
                .sum();
            ((z_sq + q_sq - 2.0 * dot).max(0.0), index)
        });
        let nearest = smallest_k(candidates, k);
        NeighborList {
            distances: nearest.iter().map(|&(sq, _)| sq.sqrt()).collect(),
            indices: nearest.iter().map(|&(_, i)| i).collect(),
        }
    }
}

/// The `k` smallest `(key, index)` pairs in ascending order, ties broken by
/// lower index.
pub(crate) fn smallest_k(items: impl Iterator<Item = (f64, usize)>, k: usize) -> Vec<(f64, usize)> {
    let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
    for (key, index) in items {
        let cand = Candidate { key, index };
        if heap.len() < k {
            heap.push(cand);
        } else if heap.peek().is_some_and(|top| cand < *top) {
            heap.pop();
            heap.push(cand);
        }
    }
    heap.into_sorted_vec()
        .into_iter()
        .map(|c| (c.key, c.index))
        .collect()
}
