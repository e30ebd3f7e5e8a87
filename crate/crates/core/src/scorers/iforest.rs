//! Isolation forest.
//!
//! Each tree is grown on a subsample drawn without replacement, splitting on
//! a random non-constant feature at a uniform threshold, down to a height
//! limit of `ceil(log2(subsample))`. Tree `t` draws from its own ChaCha
//! stream `t` under the shared seed, so the forest does not depend on how
//! tree construction is scheduled.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{EmbeddingMatrix, StoredMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        size: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Nodes in pre-order; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    pub nodes: Vec<Node>,
}

/// Harmonic number `H(n) = 1 + 1/2 + … + 1/n`, summed exactly.
pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

/// Average path length of an unsuccessful binary-search-tree lookup among
/// `n` points; `c(1) = 0`, `c(2) = 1`.
pub fn average_path_length(n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let m = (n - 1) as f64;
    2.0 * harmonic(n - 1) - 2.0 * m / n as f64
}

impl IsolationTree {
    fn grow(data: &EmbeddingMatrix, rows: Vec<usize>, height_limit: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut tree = IsolationTree { nodes: Vec::new() };
        tree.grow_node(data, rows, 0, height_limit, rng);
        tree
    }

    fn grow_node(
        &mut self,
        data: &EmbeddingMatrix,
        rows: Vec<usize>,
        depth: usize,
        height_limit: usize,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { size: rows.len() });
        if depth >= height_limit || rows.len() <= 1 {
            return id;
        }
        let ranges: Vec<(usize, f64, f64)> = (0..data.cols())
            .filter_map(|f| {
                let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                    let v = f64::from(data.row(r)[f]);
                    (lo.min(v), hi.max(v))
                });
                (hi > lo).then_some((f, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return id;
        }
        let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
        // Threshold in (lo, hi], so both sides are non-empty.
        let u: f64 = 1.0 - rng.random::<f64>();
        let mut threshold = lo + u * (hi - lo);
        if threshold <= lo {
            threshold = hi;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&row| f64::from(data.row(row)[feature]) < threshold);
        let left = self.grow_node(data, l, depth + 1, height_limit, rng);
        let right = self.grow_node(data, r, depth + 1, height_limit, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Depth of the leaf reached by `q` plus the expected remaining path
    /// length for the points sharing that leaf.
    pub fn path_length(&self, q: &[f32]) -> f64 {
        let mut node = 0;
        let mut depth = 0usize;
        loop {
            match self.nodes[node] {
                Node::Leaf { size } => return depth as f64 + average_path_length(size),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if f64::from(q[feature]) < threshold { left } else { right };
                    depth += 1;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    dim: usize,
    subsample: usize,
    trees: Vec<IsolationTree>,
}

impl IsolationForest {
    pub fn fit(train: &EmbeddingMatrix, n_estimators: usize, subsample: usize, seed: u64) -> Result<Self> {
        if train.rows() < 2 {
            return Err(Error::Config(
                "isolation forest needs at least 2 training rows".into(),
            ));
        }
        if n_estimators == 0 || subsample < 2 {
            return Err(Error::Config(
                "isolation forest needs n_estimators >= 1 and subsample >= 2".into(),
            ));
        }
        let psi = subsample.min(train.rows());
        let height_limit = (psi as f64).log2().ceil() as usize;
        let trees = (0..n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let rows = sample(&mut rng, train.rows(), psi).into_vec();
                IsolationTree::grow(train, rows, height_limit, &mut rng)
            })
            .collect();
        Ok(Self {
            dim: train.cols(),
            subsample: psi,
            trees,
        })
    }

    pub fn from_trees(dim: usize, subsample: usize, trees: Vec<IsolationTree>) -> Result<Self> {
        if trees.is_empty() || subsample < 2 {
            return Err(Error::Config("forest needs trees and subsample >= 2".into()));
        }
        Ok(Self { dim, subsample, trees })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn subsample(&self) -> usize {
        self.subsample
    }

    pub fn trees(&self) -> &[IsolationTree] {
        &self.trees
    }

    pub fn mean_path_length(&self, q: &[f32]) -> f64 {
        self.trees.iter().map(|t| t.path_length(q)).sum::<f64>() / self.trees.len() as f64
    }

    /// The classic anomaly score `2^(−E[h]/c(ψ))`, in (0, 1].
    pub fn anomaly_score(&self, q: &[f32]) -> f64 {
        (-self.mean_path_length(q) / average_path_length(self.subsample)).exp2()
    }

    pub fn score(&self, q: &[f32]) -> f64 {
        -self.anomaly_score(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_length_normalizer() {
        assert_eq!(average_path_length(1), 0.0);
        assert_eq!(average_path_length(2), 1.0);
        // c(3) = 2·(1 + 1/2) − 2·2/3
        assert!((average_path_length(3) - (3.0 - 4.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn two_point_tree_gives_half() {
        let train = EmbeddingMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let f = IsolationForest::fit(&train, 1, 256, 3).unwrap();
        assert_eq!(f.subsample(), 2);
        assert_eq!(f.trees()[0].nodes.len(), 3);
        for q in [[1.0, 0.0], [0.0, 1.0], [5.0, -5.0]] {
            assert_eq!(f.mean_path_length(&q), 1.0);
            assert_eq!(f.score(&q), -0.5);
        }
    }

    #[test]
    fn midpoint_when_path_equals_normalizer() {
        let tree = IsolationTree {
            nodes: vec![Node::Leaf { size: 256 }],
        };
        let f = IsolationForest::from_trees(1, 256, vec![tree]).unwrap();
        assert_eq!(f.mean_path_length(&[0.0]), average_path_length(256));
        assert_eq!(f.score(&[0.0]), -0.5);
    }

    #[test]
    fn constant_data_is_a_single_leaf() {
        let train = EmbeddingMatrix::from_rows(&vec![vec![0.6, 0.8]; 8]).unwrap();
        let f = IsolationForest::fit(&train, 4, 256, 0).unwrap();
        assert!(f.trees().iter().all(|t| t.nodes == vec![Node::Leaf { size: 8 }]));
    }

    #[test]
    fn seed_controls_structure() {
        let rows: Vec<Vec<f32>> = (0..64).map(|i| vec![(i as f32).sin(), (i as f32).cos()]).collect();
        let train = EmbeddingMatrix::from_rows(&rows).unwrap();
        let a = IsolationForest::fit(&train, 10, 32, 9).unwrap();
        let b = IsolationForest::fit(&train, 10, 32, 9).unwrap();
        let c = IsolationForest::fit(&train, 10, 32, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_degenerate_configs() {
        let one = EmbeddingMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(IsolationForest::fit(&one, 10, 256, 0).is_err());
    }
}
