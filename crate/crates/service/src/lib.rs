//! HTTP/JSON front end for `oodknn-core`.
//!
//! Fitted scorers live in memory for the life of the process and are
//! addressed by the id returned from `/v1/fit` or `/v1/load`. Compute-heavy
//! handlers run on the blocking pool so the async workers stay responsive.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Serialize;
use tokio::net::TcpListener;

use oodknn_core::api::{
    ApiError, CalibrateRequest, DecideRequest, DecideResponse, EvalRequest, EvalResponse, FitRequest, FitResponse,
    HistRequest, LoadRequest, ScoreRequest, ScorerId, ScorerInfo,
};
use oodknn_core::eval::{calibrate, decide, score_histogram, DetectionThreshold, Histogram, Verdict};
use oodknn_core::pipeline::{evaluate_with, fit_manifest, score_entry};
use oodknn_core::scorers::{load_state, save_state};
use oodknn_core::store::{DatasetEntry, DatasetManifest, DatasetRole};
use oodknn_core::{Error, ErrorKind, FittedScorer, ScoreVector};

/// JSON extractor whose rejections use the same error body as every other
/// failure.
#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ServiceError))]
struct Json<T>(T);

impl<T: Serialize> IntoResponse for Json<T> {
    fn into_response(self) -> Response {
        axum::Json(self.0).into_response()
    }
}

#[derive(Debug)]
pub struct ServiceError {
    status: StatusCode,
    body: ApiError,
}

pub fn status_for(kind: ErrorKind) -> StatusCode {
    match kind {
        ErrorKind::Config => StatusCode::BAD_REQUEST,
        ErrorKind::Input => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorKind::Io => StatusCode::NOT_FOUND,
        ErrorKind::Format => StatusCode::UNSUPPORTED_MEDIA_TYPE,
        ErrorKind::Shape => StatusCode::CONFLICT,
    }
}

impl From<Error> for ServiceError {
    fn from(e: Error) -> Self {
        let body = ApiError::from(&e);
        ServiceError {
            status: status_for(body.kind),
            body,
        }
    }
}

impl From<JsonRejection> for ServiceError {
    fn from(r: JsonRejection) -> Self {
        ServiceError {
            status: StatusCode::BAD_REQUEST,
            body: ApiError {
                kind: ErrorKind::Config,
                message: format!("malformed request: {}", r.body_text()),
            },
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status, axum::Json(self.body)).into_response()
    }
}

type Reply<T> = Result<Json<T>, ServiceError>;

#[derive(Default)]
struct Registry {
    next_id: AtomicU64,
    scorers: RwLock<HashMap<ScorerId, Arc<FittedScorer>>>,
}

/// Shared service state: the registry of fitted scorers.
#[derive(Clone, Default)]
pub struct AppState {
    registry: Arc<Registry>,
}

impl AppState {
    fn insert(&self, scorer: FittedScorer) -> ScorerInfo {
        let id = self.registry.next_id.fetch_add(1, Ordering::Relaxed) + 1;
        let info = describe(id, &scorer);
        self.registry
            .scorers
            .write()
            .expect("scorer registry poisoned")
            .insert(id, Arc::new(scorer));
        info
    }

    fn get(&self, id: ScorerId) -> Result<Arc<FittedScorer>, Error> {
        self.registry
            .scorers
            .read()
            .expect("scorer registry poisoned")
            .get(&id)
            .cloned()
            .ok_or_else(|| Error::Config(format!("no scorer with id {id}")))
    }

    pub fn len(&self) -> usize {
        self.registry.scorers.read().expect("scorer registry poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn describe(id: ScorerId, scorer: &FittedScorer) -> ScorerInfo {
    ScorerInfo {
        scorer_id: id,
        config: scorer.config().clone(),
        dim: scorer.dim(),
        notes: scorer
            .config()
            .construction_notes()
            .into_iter()
            .map(|(k, v)| format!("{k}: {v}"))
            .collect(),
    }
}

async fn blocking<T, F>(f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, Error> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ServiceError::from),
        Err(e) => Err(ServiceError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            body: ApiError {
                kind: ErrorKind::Input,
                message: format!("worker failed: {e}"),
            },
        }),
    }
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn fit(State(state): State<AppState>, Json(req): Json<FitRequest>) -> Reply<FitResponse> {
    tracing::info!(manifest = %req.manifest.display(), config = %req.config, "fit");
    let (scorer, files) = blocking(move || {
        let manifest = DatasetManifest::load(&req.manifest)?;
        let scorer = fit_manifest(&manifest, req.config)?;
        let files = match &req.out_dir {
            Some(dir) => save_state(&scorer, dir)?,
            None => Vec::new(),
        };
        Ok((scorer, files))
    })
    .await?;
    Ok(Json(FitResponse {
        scorer: state.insert(scorer),
        files,
    }))
}

async fn load(State(state): State<AppState>, Json(req): Json<LoadRequest>) -> Reply<ScorerInfo> {
    tracing::info!(dir = %req.state_dir.display(), "load");
    let scorer = blocking(move || load_state(&req.state_dir)).await?;
    Ok(Json(state.insert(scorer)))
}

async fn score(State(state): State<AppState>, Json(req): Json<ScoreRequest>) -> Reply<ScoreVector> {
    let scorer = state.get(req.scorer_id)?;
    let vector = blocking(move || {
        let name = req.dataset.clone().unwrap_or_else(|| {
            req.input
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        });
        let uses_logits = scorer.method().uses_logits();
        let entry = DatasetEntry {
            role: DatasetRole::IdTest,
            name,
            embedding_path: req.input.clone(),
            logit_path: uses_logits.then(|| req.input.clone()),
        };
        score_entry(&scorer, &entry)
    })
    .await?;
    Ok(Json(vector))
}

async fn calibrate_handler(Json(req): Json<CalibrateRequest>) -> Reply<DetectionThreshold> {
    Ok(Json(calibrate(&req.scores, req.tpr_level)?))
}

async fn decide_handler(Json(req): Json<DecideRequest>) -> Reply<DecideResponse> {
    if req.threshold.gamma.is_nan() {
        return Err(Error::Config("gamma is NaN".into()).into());
    }
    let verdicts: Vec<Verdict> = req.scores.iter().map(|&s| decide(s, &req.threshold)).collect();
    let accepted = verdicts.iter().filter(|v| **v == Verdict::Id).count();
    Ok(Json(DecideResponse { verdicts, accepted }))
}

async fn eval(State(state): State<AppState>, Json(req): Json<EvalRequest>) -> Reply<EvalResponse> {
    let existing = match (req.scorer_id, &req.config) {
        (Some(id), None) => Some(state.get(id)?),
        (None, Some(_)) => None,
        _ => {
            return Err(Error::Config("eval needs exactly one of config and scorer_id".into()).into());
        }
    };
    tracing::info!(manifest = %req.manifest.display(), "eval");
    let run = blocking(move || {
        let manifest = DatasetManifest::load(&req.manifest)?;
        manifest.id_train()?;
        manifest.id_test()?;
        manifest.ood_tests()?;
        let scorer = match existing {
            Some(s) => s,
            None => Arc::new(fit_manifest(&manifest, req.config.expect("checked above"))?),
        };
        evaluate_with(&scorer, &manifest, req.tpr_level)
    })
    .await?;
    Ok(Json(EvalResponse {
        summary: run.summary,
        id_scores: run.id_scores,
        ood_scores: run.ood_scores,
    }))
}

async fn hist(Json(req): Json<HistRequest>) -> Reply<Histogram> {
    Ok(Json(score_histogram(&req.scores, req.n_bins)?))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/fit", post(fit))
        .route("/v1/load", post(load))
        .route("/v1/score", post(score))
        .route("/v1/calibrate", post(calibrate_handler))
        .route("/v1/decide", post(decide_handler))
        .route("/v1/eval", post(eval))
        .route("/v1/hist", post(hist))
        .with_state(state)
}

/// Binds `addr` and serves until the process ends. Returns the bound
/// address (useful with port 0) and the server task.
pub async fn spawn(addr: SocketAddr) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<std::io::Result<()>>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let app = router(AppState::default());
    let handle = tokio::spawn(async move { axum::serve(listener, app).await });
    Ok((local, handle))
}
