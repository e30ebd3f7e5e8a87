//! Fit/score abstraction over the detectors.
//!
//! Every scorer is oriented so that a higher score means "more
//! in-distribution": anomaly-style quantities (distance, LOF, reconstruction
//! error, isolation score) are negated.

mod config;
pub mod iforest;
pub mod lof;
pub mod loda;
pub mod msp;
pub mod pca;
mod persist;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::*;
pub use msp::{score_msp, softmax};
pub use persist::{load_state, save_state, CONFIG_FILE, REFERENCE_FILE, STATE_FILE};

use crate::error::{Error, Result};
use crate::knn::KnnIndex;
use crate::store::{EmbeddingMatrix, LogitMatrix, MatrixKind, StoredMatrix};

use iforest::IsolationForest;
use lof::LofModel;
use loda::LodaModel;
use pca::PcaModel;

#[derive(Debug, Clone)]
pub(crate) enum Model {
    Knn { index: KnnIndex, k: usize },
    Msp,
    Lof(LofModel),
    Pca(PcaModel),
    Iforest(IsolationForest),
    Loda(LodaModel),
}

/// An immutable fitted detector.
#[derive(Debug, Clone)]
pub struct FittedScorer {
    config: ScorerConfig,
    model: Model,
}

/// Data handed to [`FittedScorer::score_batch`].
#[derive(Debug, Clone, Copy)]
pub enum ScoreInput<'a> {
    Embeddings(&'a EmbeddingMatrix),
    Logits(&'a LogitMatrix),
}

impl ScoreInput<'_> {
    pub fn kind(&self) -> MatrixKind {
        match self {
            ScoreInput::Embeddings(_) => MatrixKind::Embeddings,
            ScoreInput::Logits(_) => MatrixKind::Logits,
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            ScoreInput::Embeddings(m) => m.rows(),
            ScoreInput::Logits(m) => m.rows(),
        }
    }
}

/// Per-sample scores of one dataset under one scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub scores: Vec<f64>,
    pub method: ScorerConfig,
    pub dataset: String,
}

impl ScoreVector {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

impl FittedScorer {
    /// Fits `config` on the training embeddings, which must be normalized
    /// for every method except MSP (which ignores them).
    pub fn fit(config: ScorerConfig, train: &EmbeddingMatrix) -> Result<Self> {
        config.validate()?;
        if config.method() != Method::Msp && !train.is_normalized() {
            return Err(Error::Validation(format!(
                "{} expects L2-normalized training embeddings",
                config.method()
            )));
        }
        let model = match config {
            ScorerConfig::Knn { k } => {
                if k > train.rows() {
                    return Err(Error::Config(format!(
                        "k={k} exceeds the {} training rows",
                        train.rows()
                    )));
                }
                Model::Knn {
                    index: KnnIndex::build(train.clone(), k)?,
                    k,
                }
            }
            ScorerConfig::Msp => Model::Msp,
            ScorerConfig::Lof { k } => Model::Lof(LofModel::fit(train.clone(), k)?),
            ScorerConfig::Pca { n_components } => Model::Pca(PcaModel::fit(train, n_components)?),
            ScorerConfig::Iforest {
                n_estimators,
                subsample,
                seed,
            } => Model::Iforest(IsolationForest::fit(train, n_estimators, subsample, seed)?),
            ScorerConfig::Loda {
                n_bins,
                n_projections,
                seed,
            } => Model::Loda(LodaModel::fit(train, n_bins, n_projections, seed)?),
        };
        Ok(Self { config, model })
    }

    pub(crate) fn from_parts(config: ScorerConfig, model: Model) -> Self {
        Self { config, model }
    }

    pub(crate) fn model(&self) -> &Model {
        &self.model
    }

    pub fn config(&self) -> &ScorerConfig {
        &self.config
    }

    pub fn method(&self) -> Method {
        self.config.method()
    }

    /// Embedding dimensionality the scorer was fitted on; `None` for MSP.
    pub fn dim(&self) -> Option<usize> {
        match &self.model {
            Model::Knn { index, .. } => Some(index.dim()),
            Model::Msp => None,
            Model::Lof(m) => Some(m.reference().cols()),
            Model::Pca(m) => Some(m.dim()),
            Model::Iforest(m) => Some(m.dim()),
            Model::Loda(m) => Some(m.dim()),
        }
    }

    pub fn knn_index(&self) -> Option<&KnnIndex> {
        match &self.model {
            Model::Knn { index, .. } => Some(index),
            _ => None,
        }
    }

    pub fn lof(&self) -> Option<&LofModel> {
        match &self.model {
            Model::Lof(m) => Some(m),
            _ => None,
        }
    }

    pub fn pca(&self) -> Option<&PcaModel> {
        match &self.model {
            Model::Pca(m) => Some(m),
            _ => None,
        }
    }

    pub fn iforest(&self) -> Option<&IsolationForest> {
        match &self.model {
            Model::Iforest(m) => Some(m),
            _ => None,
        }
    }

    pub fn loda(&self) -> Option<&LodaModel> {
        match &self.model {
            Model::Loda(m) => Some(m),
            _ => None,
        }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        match self.dim() {
            Some(d) if d != got => Err(Error::Shape(format!(
                "{} scorer was fitted on {d} dimensions, got {got}",
                self.method()
            ))),
            _ => Ok(()),
        }
    }

    /// Scores one embedding. For kNN the vector must be unit length and the
    /// result is `−d_k`.
    pub fn score_embedding(&self, q: &[f32]) -> Result<f64> {
        self.check_dim(q.len())?;
        Ok(match &self.model {
            Model::Knn { index, k } => -index.query(q, *k)?.kth_distance(),
            Model::Msp => {
                return Err(Error::Config("msp scores logits, not embeddings".into()));
            }
            Model::Lof(m) => m.score(q),
            Model::Pca(m) => m.score(q),
            Model::Iforest(m) => m.score(q),
            Model::Loda(m) => m.score(q),
        })
    }

    /// Scores one logit row (MSP only).
    pub fn score_logits(&self, logits: &[f32]) -> Result<f64> {
        match self.model {
            Model::Msp => score_msp(logits),
            _ => Err(Error::Config(format!(
                "{} scores embeddings, not logits",
                self.method()
            ))),
        }
    }

    /// Scores every row; element `i` equals the single-sample score of row
    /// `i`, independent of thread count.
    pub fn score_batch(&self, input: ScoreInput<'_>, dataset: &str) -> Result<ScoreVector> {
        let expected = if self.method().uses_logits() {
            MatrixKind::Logits
        } else {
            MatrixKind::Embeddings
        };
        if input.kind() != expected {
            return Err(Error::Config(format!(
                "{} needs {} input, got {}",
                self.method(),
                expected.name(),
                input.kind().name()
            )));
        }
        let scores: Vec<f64> = match (input, &self.model) {
            (ScoreInput::Logits(m), Model::Msp) => (0..m.rows())
                .into_par_iter()
                .map(|i| score_msp(m.row(i)))
                .collect::<Result<_>>()?,
            (ScoreInput::Embeddings(m), Model::Knn { index, k }) => {
                self.check_dim(m.cols())?;
                if !m.is_normalized() {
                    return Err(Error::Validation(
                        "knn scoring expects L2-normalized embeddings".into(),
                    ));
                }
                index
                    .batch_query(m, *k)?
                    .iter()
                    .map(|nl| -nl.kth_distance())
                    .collect()
            }
            (ScoreInput::Embeddings(m), model) => {
                self.check_dim(m.cols())?;
                let score_row = |q: &[f32]| match model {
                    Model::Lof(s) => s.score(q),
                    Model::Pca(s) => s.score(q),
                    Model::Iforest(s) => s.score(q),
                    Model::Loda(s) => s.score(q),
                    Model::Knn { .. } | Model::Msp => unreachable!("dispatched above"),
                };
                (0..m.rows()).into_par_iter().map(|i| score_row(m.row(i))).collect()
            }
            (ScoreInput::Logits(_), _) => unreachable!("kind checked above"),
        };
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::Input(format!("non-finite score for row {i}")));
        }
        Ok(ScoreVector {
            scores,
            method: self.config.clone(),
            dataset: dataset.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_rows(rows: &[Vec<f32>]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows).unwrap().l2_normalize().unwrap()
    }

    fn basis3() -> EmbeddingMatrix {
        unit_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]])
    }

    #[test]
    fn knn_score_is_negated_kth_distance() {
        let s = FittedScorer::fit(ScorerConfig::Knn { k: 2 }, &basis3()).unwrap();
        let v = s.score_embedding(&[1.0, 0.0, 0.0]).unwrap();
        assert!((v + 2f64.sqrt()).abs() < 1e-12);
        let s1 = FittedScorer::fit(ScorerConfig::Knn { k: 1 }, &basis3()).unwrap();
        assert_eq!(s1.score_embedding(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn fit_config_errors() {
        let lof = FittedScorer::fit(ScorerConfig::Lof { k: 20 }, &basis3());
        assert!(matches!(lof, Err(Error::Config(_))));
        let pca = FittedScorer::fit(ScorerConfig::Pca { n_components: 4 }, &basis3());
        assert!(matches!(pca, Err(Error::Config(_))));
        let knn = FittedScorer::fit(ScorerConfig::Knn { k: 4 }, &basis3());
        assert!(matches!(knn, Err(Error::Config(_))));
        let raw = EmbeddingMatrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        assert!(FittedScorer::fit(ScorerConfig::Knn { k: 1 }, &raw).is_err());
    }

    #[test]
    fn kind_and_shape_mismatches() {
        let knn = FittedScorer::fit(ScorerConfig::Knn { k: 1 }, &basis3()).unwrap();
        let logits = LogitMatrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            knn.score_batch(ScoreInput::Logits(&logits), "x"),
            Err(Error::Config(_))
        ));
        let wide = unit_rows(&[vec![1.0, 0.0, 0.0, 0.0]]);
        assert!(matches!(
            knn.score_batch(ScoreInput::Embeddings(&wide), "x"),
            Err(Error::Shape(_))
        ));
        assert!(matches!(knn.score_embedding(&[1.0, 0.0]), Err(Error::Shape(_))));

        let msp = FittedScorer::fit(ScorerConfig::Msp, &basis3()).unwrap();
        assert!(matches!(
            msp.score_batch(ScoreInput::Embeddings(&basis3()), "x"),
            Err(Error::Config(_))
        ));
        let v = msp.score_batch(ScoreInput::Logits(&logits), "x").unwrap();
        assert_eq!(v.scores, vec![score_msp(&[0.0, 1.0]).unwrap()]);
    }

    #[test]
    fn batch_of_one_matches_single() {
        let train = unit_rows(&(0..30).map(|i| vec![(i as f32).cos(), (i as f32).sin(), 0.3]).collect::<Vec<_>>());
        let q = unit_rows(&[vec![0.2, 0.9, 0.1]]);
        for m in [Method::Knn, Method::Lof, Method::Iforest, Method::Loda] {
            let s = FittedScorer::fit(ScorerConfig::default_for(m).with_small_k(), &train).unwrap();
            let batch = s.score_batch(ScoreInput::Embeddings(&q), "q").unwrap();
            assert_eq!(batch.scores[0], s.score_embedding(q.row(0)).unwrap(), "{m}");
        }
    }

    impl ScorerConfig {
        fn with_small_k(mut self) -> Self {
            if let ScorerConfig::Lof { k } = &mut self {
                *k = 5;
            }
            self
        }
    }
}
