//! Lightweight on-line detector of anomalies: an ensemble of equal-width
//! histograms over sparse random projections.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{EmbeddingMatrix, StoredMatrix};

/// One sparse projection direction and the smoothed histogram of training
/// projections along it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    /// Left edge of the first bin.
    pub lo: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
    /// `ln((count + 1) / (n + bins) / bin_width)` per bin.
    pub log_density: Vec<f64>,
}

impl Projection {
    pub fn project(&self, q: &[f32]) -> f64 {
        self.indices
            .iter()
            .zip(&self.weights)
            .map(|(&i, &w)| w * f64::from(q[i]))
            .sum()
    }

    /// Bin holding `x`; values outside the training range fall into the
    /// nearest edge bin.
    pub fn bin(&self, x: f64) -> usize {
        let last = self.counts.len() - 1;
        let pos = ((x - self.lo) / self.bin_width).floor();
        if pos.is_nan() || pos < 0.0 {
            0
        } else {
            (pos as usize).min(last)
        }
    }

    pub fn log_density_at(&self, q: &[f32]) -> f64 {
        self.log_density[self.bin(self.project(q))]
    }
}

fn histogram(values: &[f64], n_bins: usize, indices: Vec<usize>, weights: Vec<f64>) -> Projection {
    let (mut lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mut range = hi - lo;
    if range <= 0.0 {
        // All training projections coincide: a unit-wide range centred on them.
        lo -= 0.5;
        range = 1.0;
    }
    let bin_width = range / n_bins as f64;
    let mut proj = Projection {
        indices,
        weights,
        lo,
        bin_width,
        counts: vec![0; n_bins],
        log_density: Vec::new(),
    };
    for &v in values {
        let b = proj.bin(v);
        proj.counts[b] += 1;
    }
    let total = (values.len() + n_bins) as f64;
    proj.log_density = proj
        .counts
        .iter()
        .map(|&c| ((c as f64 + 1.0) / total / bin_width).ln())
        .collect();
    proj
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LodaModel {
    dim: usize,
    projections: Vec<Projection>,
}

impl LodaModel {
    pub fn fit(train: &EmbeddingMatrix, n_bins: usize, n_projections: usize, seed: u64) -> Result<Self> {
        if n_bins == 0 || n_projections == 0 {
            return Err(Error::Config("LODA needs n_bins >= 1 and n_projections >= 1".into()));
        }
        let d = train.cols();
        let nonzeros = ((d as f64).sqrt().ceil() as usize).clamp(1, d);
        let projections = (0..n_projections)
            .map(|j| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(j as u64);
                let mut indices = sample(&mut rng, d, nonzeros).into_vec();
                indices.sort_unstable();
                let weights: Vec<f64> = (0..nonzeros).map(|_| rng.sample(StandardNormal)).collect();
                let values: Vec<f64> = (0..train.rows())
                    .map(|r| {
                        let row = train.row(r);
                        indices.iter().zip(&weights).map(|(&i, &w)| w * f64::from(row[i])).sum()
                    })
                    .collect();
                histogram(&values, n_bins, indices, weights)
            })
            .collect();
        Ok(Self { dim: d, projections })
    }

    pub fn from_projections(dim: usize, projections: Vec<Projection>) -> Result<Self> {
        if projections.is_empty() {
            return Err(Error::Config("LODA needs at least one projection".into()));
        }
        Ok(Self { dim, projections })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn projections(&self) -> &[Projection] {
        &self.projections
    }

    /// Mean log density over projections; higher means more typical.
    pub fn score(&self, q: &[f32]) -> f64 {
        self.projections.iter().map(|p| p.log_density_at(q)).sum::<f64>() / self.projections.len() as f64
    }
}
