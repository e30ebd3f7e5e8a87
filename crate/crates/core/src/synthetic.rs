//! Seeded synthetic embeddings for fixtures and demos: unit vectors
//! concentrated around a mean direction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::store::EmbeddingMatrix;

/// The `axis`-th standard basis vector of `dim` dimensions.
pub fn basis(dim: usize, axis: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[axis] = 1.0;
    v
}

/// `n` unit vectors drawn as `normalize(mean + spread · N(0, I))`.
///
/// With `spread · sqrt(dim)` well under 1 the cluster's angular radius is
/// roughly `atan(spread · sqrt(dim))`.
pub fn cluster(mean: &[f64], n: usize, spread: f64, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = mean.len();
    let mut data = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let v: Vec<f64> = mean
            .iter()
            .map(|&m| m + spread * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        data.extend(v.iter().map(|x| (x / norm) as f32));
    }
    EmbeddingMatrix::new(n, dim, data)
        .expect("cluster dimensions are consistent")
        .l2_normalize()
        .expect("cluster rows are non-zero")
}

/// `n` raw (unnormalized) Gaussian rows, handy for scale tests.
pub fn gaussian(n: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * dim).map(|_| rng.sample::<f64, _>(StandardNormal) as f32).collect();
    EmbeddingMatrix::new(n, dim, data).expect("dimensions are consistent")
}
