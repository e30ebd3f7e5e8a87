//! Out-of-distribution detection over precomputed network embeddings.
//!
//! The primary detector L2-normalizes penultimate-layer features and scores a
//! test embedding by the negated Euclidean distance to its k-th nearest
//! in-distribution training embedding. Classical baselines (MSP, LOF, PCA
//! reconstruction error, isolation forest, LODA) share the same fit/score
//! interface, and [`eval`] provides threshold calibration plus FPR@TPR and
//! AUROC.
//!
//! All scores are oriented so that higher means "more in-distribution".

pub mod api;
pub mod error;
pub mod eval;
pub mod knn;
pub mod pipeline;
pub mod report;
pub mod scorers;
pub mod store;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
pub use eval::{auroc, calibrate, decide, fpr_at_tpr, score_histogram, DetectionThreshold, Histogram, Verdict};
pub use knn::{KnnIndex, NeighborList};
pub use report::{EvalReport, EvalSummary};
pub use scorers::{FittedScorer, Method, ScoreInput, ScoreVector, ScorerConfig};
pub use store::{DatasetManifest, EmbeddingMatrix, LogitMatrix};
