//! Slow, obviously-correct reference computations for tests.
//!
//! Nothing here calls into `oodknn-core`: rows are plain `Vec<f64>`/`Vec<f32>`
//! and every routine enumerates or sorts everything.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// All reference distances sorted by `(distance, index)`, truncated to `k`.
pub fn brute_knn(reference: &[Vec<f32>], q: &[f32], k: usize) -> Vec<(f64, usize)> {
    let mut all: Vec<(f64, usize)> = reference
        .iter()
        .enumerate()
        .map(|(i, r)| (euclidean(r, q), i))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    all.truncate(k);
    all
}

/// AUROC by enumerating every (ID, OOD) pair; ties count one half.
pub fn pairwise_auroc(id: &[f64], ood: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &a in id {
        for &b in ood {
            if a > b {
                wins += 1.0;
            } else if a == b {
                wins += 0.5;
            }
        }
    }
    wins / (id.len() * ood.len()) as f64
}

/// Largest observed score `g` such that at least `tpr` of `id` is `>= g`,
/// found by trying every candidate.
pub fn enumerate_gamma(id: &[f64], tpr: f64) -> f64 {
    let n = id.len() as f64;
    let mut best = f64::NEG_INFINITY;
    for &g in id {
        let kept = id.iter().filter(|&&s| s >= g).count() as f64;
        if kept >= tpr * n - 1e-9 && g > best {
            best = g;
        }
    }
    best
}

/// Local outlier factor straight from the definitions: k-distance,
/// reachability distance, local reachability density, and the LOF ratio.
/// Training points exclude themselves from their own neighborhoods; queries
/// see every training point. Neighborhoods hold exactly `k` points, ties
/// resolved by lower index. Mean reachability is floored at `1e-12`.
pub struct TextbookLof {
    train: Vec<Vec<f32>>,
    k: usize,
    k_distance: Vec<f64>,
    lrd: Vec<f64>,
}

impl TextbookLof {
    pub fn new(train: Vec<Vec<f32>>, k: usize) -> Self {
        let n = train.len();
        let mut neighborhoods = Vec::with_capacity(n);
        for i in 0..n {
            let mut others: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (euclidean(&train[i], &train[j]), j))
                .collect();
            others.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            others.truncate(k);
            neighborhoods.push(others);
        }
        let k_distance: Vec<f64> = neighborhoods.iter().map(|nb| nb[k - 1].0).collect();
        let lrd = neighborhoods
            .iter()
            .map(|nb| {
                let mut total = 0.0;
                for &(d, o) in nb {
                    total += if k_distance[o] > d { k_distance[o] } else { d };
                }
                let mean = total / k as f64;
                1.0 / if mean < 1e-12 { 1e-12 } else { mean }
            })
            .collect();
        Self {
            train,
            k,
            k_distance,
            lrd,
        }
    }

    pub fn lof(&self, q: &[f32]) -> f64 {
        let nb = brute_knn(&self.train, q, self.k);
        let mut reach_total = 0.0;
        let mut lrd_total = 0.0;
        for &(d, o) in &nb {
            reach_total += if self.k_distance[o] > d { self.k_distance[o] } else { d };
            lrd_total += self.lrd[o];
        }
        let mean_reach = reach_total / self.k as f64;
        let lrd_q = 1.0 / if mean_reach < 1e-12 { 1e-12 } else { mean_reach };
        (lrd_total / self.k as f64) / lrd_q
    }
}

/// `n` random unit vectors in `dim` dimensions.
pub fn random_unit_rows(n: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| (x / norm) as f32).collect()
        })
        .collect()
}

/// `n` unit vectors concentrated around the `axis`-th basis vector:
/// `normalize(e_axis + spread * N(0, I))`.
pub fn unit_cluster(n: usize, dim: usize, axis: usize, spread: f64, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..dim)
                .map(|j| {
                    let noise: f64 = rng.sample(StandardNormal);
                    let base = if j == axis { 1.0 } else { 0.0 };
                    base + spread * noise
                })
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| (x / norm) as f32).collect()
        })
        .collect()
}
