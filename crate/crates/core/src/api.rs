//! Request and response bodies of the HTTP/JSON surface.
//!
//! Paths in requests are read and written by the service process, so a
//! client talking to a remote service must send paths valid on that host.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ErrorKind};
use crate::eval::DetectionThreshold;
use crate::report::EvalSummary;
use crate::scorers::{ScoreVector, ScorerConfig};

pub type ScorerId = u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRequest {
    pub manifest: PathBuf,
    pub config: ScorerConfig,
    /// When set, the fitted state is also written to this directory.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerInfo {
    pub scorer_id: ScorerId,
    pub config: ScorerConfig,
    pub dim: Option<usize>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResponse {
    pub scorer: ScorerInfo,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadRequest {
    pub state_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub scorer_id: ScorerId,
    /// Embedding file, or a logit file when the scorer is MSP.
    pub input: PathBuf,
    #[serde(default)]
    pub dataset: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateRequest {
    pub scores: Vec<f64>,
    pub tpr_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecideRequest {
    pub scores: Vec<f64>,
    pub threshold: DetectionThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecideResponse {
    pub verdicts: Vec<crate::eval::Verdict>,
    pub accepted: usize,
}

/// Either `config` (fit on the manifest's `id-train` first) or `scorer_id`
/// (reuse a scorer the service already holds) must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRequest {
    pub manifest: PathBuf,
    #[serde(default)]
    pub config: Option<ScorerConfig>,
    #[serde(default)]
    pub scorer_id: Option<ScorerId>,
    pub tpr_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResponse {
    pub summary: EvalSummary,
    pub id_scores: ScoreVector,
    pub ood_scores: Vec<ScoreVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistRequest {
    pub scores: Vec<f64>,
    pub n_bins: usize,
}

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub kind: ErrorKind,
    pub message: String,
}

impl From<&Error> for ApiError {
    fn from(e: &Error) -> Self {
        ApiError {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}
