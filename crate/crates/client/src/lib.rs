//! Thin async client for the oodknn HTTP service.

use serde::de::DeserializeOwned;
use serde::Serialize;

use oodknn_core::api::{
    ApiError, CalibrateRequest, DecideRequest, DecideResponse, EvalRequest, EvalResponse, FitRequest, FitResponse,
    HistRequest, LoadRequest, ScoreRequest, ScorerInfo,
};
use oodknn_core::eval::{DetectionThreshold, Histogram};
use oodknn_core::{ErrorKind, ScoreVector};

pub use oodknn_core::api;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("{}", .error.message)]
    Api { status: u16, error: ApiError },
    #[error("cannot reach service: {0}")]
    Transport(#[from] reqwest::Error),
}

impl ClientError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            ClientError::Api { error, .. } => error.kind,
            ClientError::Transport(_) => ErrorKind::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, for example `http://127.0.0.1:7878`.
    pub fn new(base: impl Into<String>) -> Self {
        Client {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    async fn post<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R> {
        let resp = self.http.post(format!("{}{path}", self.base)).json(body).send().await?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let bytes = resp.bytes().await?;
        let error = serde_json::from_slice::<ApiError>(&bytes).unwrap_or_else(|_| ApiError {
            kind: ErrorKind::Io,
            message: format!("service returned {status}: {}", String::from_utf8_lossy(&bytes)),
        });
        Err(ClientError::Api {
            status: status.as_u16(),
            error,
        })
    }

    pub async fn health(&self) -> Result<()> {
        self.http
            .get(format!("{}/v1/health", self.base))
            .send()
            .await?
            .error_for_status()?;
        Ok(())
    }

    pub async fn fit(&self, req: &FitRequest) -> Result<FitResponse> {
        self.post("/v1/fit", req).await
    }

    pub async fn load(&self, req: &LoadRequest) -> Result<ScorerInfo> {
        self.post("/v1/load", req).await
    }

    pub async fn score(&self, req: &ScoreRequest) -> Result<ScoreVector> {
        self.post("/v1/score", req).await
    }

    pub async fn calibrate(&self, req: &CalibrateRequest) -> Result<DetectionThreshold> {
        self.post("/v1/calibrate", req).await
    }

    pub async fn decide(&self, req: &DecideRequest) -> Result<DecideResponse> {
        self.post("/v1/decide", req).await
    }

    pub async fn eval(&self, req: &EvalRequest) -> Result<EvalResponse> {
        self.post("/v1/eval", req).await
    }

    pub async fn hist(&self, req: &HistRequest) -> Result<Histogram> {
        self.post("/v1/hist", req).await
    }
}
