//! HTTP inference service.
//!
//! Endpoints:
//!
//! - `GET /api/health` returns `{"status":"ok","model_id":...}`
//! - `GET /api/labels` returns the class names in code order
//! - `POST /api/predict` takes raw WAV bytes and returns
//!   `{"scores":[{"label","probability"}...],"top":...,"model_id":...}`
//! - anything else is served from the static directory, if one is given
//!
//! The model is loaded once and shared read-only between requests.

use std::io;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use emoser_core::audio::{has_wave_magic, read_wav, AudioError};
use emoser_core::models::{self, decode_checkpoint, LabelScore, Model, ModelError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tower_http::services::ServeDir;

/// Largest accepted request body.
pub const MAX_BODY_BYTES: usize = 10 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot read checkpoint {path}: {source}")]
    CheckpointRead { path: PathBuf, source: io::Error },
    #[error("cannot load checkpoint: {0}")]
    CheckpointLoad(#[from] ModelError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error("server error: {0}")]
    Io(#[from] io::Error),
}

/// Shared, immutable service state.
#[derive(Debug, Clone)]
pub struct AppState {
    model: Arc<Model>,
    model_id: Arc<str>,
}

impl AppState {
    pub fn new(model: Model, model_id: impl Into<String>) -> Self {
        Self {
            model: Arc::new(model),
            model_id: model_id.into().into(),
        }
    }

    /// Decodes a checkpoint; the model id is the SHA-256 of its bytes.
    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self, ServeError> {
        let model = decode_checkpoint(bytes)?;
        Ok(Self::new(model, checkpoint_id(bytes)))
    }

    pub fn from_checkpoint(path: &Path) -> Result<Self, ServeError> {
        let bytes = std::fs::read(path).map_err(|source| ServeError::CheckpointRead {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_checkpoint_bytes(&bytes)
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }
}

/// Lowercase hex SHA-256.
pub fn checkpoint_id(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub scores: Vec<LabelScore>,
    pub top: String,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

/// Request failures with their machine-readable codes.
#[derive(Debug)]
pub enum ApiError {
    UnsupportedFormat(String),
    MalformedWav(String),
    PayloadTooLarge,
    BadRequest(String),
    Internal(String),
}

impl ApiError {
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::UnsupportedFormat(_) => "unsupported_format",
            ApiError::MalformedWav(_) => "malformed_wav",
            ApiError::PayloadTooLarge => "payload_too_large",
            ApiError::BadRequest(_) => "bad_request",
            ApiError::Internal(_) => "internal",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::UnsupportedFormat(_) | ApiError::MalformedWav(_) | ApiError::BadRequest(_) => {
                StatusCode::BAD_REQUEST
            }
            ApiError::PayloadTooLarge => StatusCode::PAYLOAD_TOO_LARGE,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<AudioError> for ApiError {
    fn from(err: AudioError) -> Self {
        match err {
            AudioError::UnsupportedFormat(_) => ApiError::UnsupportedFormat(err.to_string()),
            _ => ApiError::MalformedWav(err.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        let body = match self {
            ApiError::Internal(detail) => {
                // The detail stays in the log; clients only get a reference.
                let id = uuid::Uuid::new_v4().to_string();
                log::error!("internal error {id}: {detail}");
                ErrorBody {
                    error: "internal".into(),
                    message: "internal server error".into(),
                    id: Some(id),
                }
            }
            ApiError::PayloadTooLarge => ErrorBody {
                error: "payload_too_large".into(),
                message: format!("request body exceeds {MAX_BODY_BYTES} bytes"),
                id: None,
            },
            ref other @ (ApiError::UnsupportedFormat(ref m)
            | ApiError::MalformedWav(ref m)
            | ApiError::BadRequest(ref m)) => ErrorBody {
                error: other.code().into(),
                message: m.clone(),
                id: None,
            },
        };
        (status, Json(body)).into_response()
    }
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        model_id: state.model_id.to_string(),
    })
}

async fn labels(State(state): State<AppState>) -> Json<Vec<String>> {
    Json(state.model.labels())
}

/// Decodes and scores one WAV body.
pub fn predict_bytes(state: &AppState, body: &[u8]) -> Result<PredictResponse, ApiError> {
    if !has_wave_magic(body) {
        return Err(ApiError::UnsupportedFormat("body is not a RIFF/WAVE file".into()));
    }
    let clip = read_wav(body)?;
    let scores = models::predict(&state.model, &clip).map_err(|e| match e {
        ModelError::Audio(a) => ApiError::from(a),
        other => ApiError::Internal(other.to_string()),
    })?;
    Ok(PredictResponse {
        scores: scores.scores,
        top: scores.top,
        model_id: state.model_id.to_string(),
    })
}

async fn predict(
    State(state): State<AppState>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<PredictResponse>, ApiError> {
    let body = body.map_err(|rejection| {
        if rejection.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::PayloadTooLarge
        } else {
            ApiError::BadRequest(rejection.body_text())
        }
    })?;
    let response = tokio::task::spawn_blocking(move || predict_bytes(&state, &body))
        .await
        .map_err(|e| ApiError::Internal(format!("inference task failed: {e}")))??;
    Ok(Json(response))
}

/// Routes for the API, plus static files from `static_dir` when given.
pub fn router(state: AppState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/labels", get(labels))
        .route("/api/predict", post(predict))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Binds `addr` and returns the listener with its resolved address.
pub async fn bind(addr: &str) -> Result<(tokio::net::TcpListener, SocketAddr), ServeError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind {
            addr: addr.to_string(),
            source,
        })?;
    let local = listener.local_addr()?;
    Ok((listener, local))
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> Result<(), ServeError> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// Loads the checkpoint, binds and serves.
pub async fn start(checkpoint: &Path, addr: &str, static_dir: Option<&Path>) -> Result<(), ServeError> {
    let state = AppState::from_checkpoint(checkpoint)?;
    let (listener, local) = bind(addr).await?;
    log::info!("model {} listening on http://{local}", state.model_id());
    serve(listener, router(state, static_dir)).await
}
