//! HTTP API: point listing, synthesis and audio retrieval.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

use lve_core::picker::{PointIndex, VIEW_MARGIN};
use lve_core::reduction::{BoundingBox, Embedding2D};
use lve_core::synthesis::{validate_text, SynthesisBackend, SynthesisError, SynthesisRequest};
use lve_core::table::LatentTable;
use lve_core::acoustic::encode_wav;

use crate::cache::{audio_digest, is_digest, AudioCache};

/// Everything a request needs. Immutable apart from the audio cache.
pub struct ServiceState {
    table: LatentTable,
    embedding: Embedding2D,
    index: PointIndex,
    backend: Arc<dyn SynthesisBackend>,
    cache: AudioCache,
}

impl ServiceState {
    /// Fails unless the table and embedding cover the same ids.
    pub fn new(
        table: LatentTable,
        embedding: Embedding2D,
        backend: Arc<dyn SynthesisBackend>,
        out_dir: impl Into<PathBuf>,
    ) -> anyhow::Result<Self> {
        embedding.validate_against(&table)?;
        let index = PointIndex::new(&embedding)?;
        let cache = AudioCache::new(out_dir)?;
        Ok(Self {
            table,
            embedding,
            index,
            backend,
            cache,
        })
    }

    pub fn cache(&self) -> &AudioCache {
        &self.cache
    }

    pub fn table(&self) -> &LatentTable {
        &self.table
    }

    pub fn embedding(&self) -> &Embedding2D {
        &self.embedding
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PointWire {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PointsResponse {
    pub points: Vec<PointWire>,
    pub bbox: BoundingBox,
    pub dim: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SynthesizeRequestWire {
    pub text: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesizeResponseWire {
    pub utterance: String,
    pub point_id: String,
    pub latent: Vec<f64>,
    pub x: f64,
    pub y: f64,
    pub audio_url: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorWire {
    pub error: String,
    pub category: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    category: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            category: "invalid-request",
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            category: "not-found",
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            category: "internal",
            message: message.into(),
        }
    }
}

impl From<SynthesisError> for ApiError {
    fn from(e: SynthesisError) -> Self {
        let status = match e {
            SynthesisError::InvalidRequest(_) => StatusCode::BAD_REQUEST,
            SynthesisError::External(_) => StatusCode::BAD_GATEWAY,
            SynthesisError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self {
            status,
            category: e.category(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        Self::internal(format!("audio store: {e}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(category = self.category, "{}", self.message);
        }
        let body = ErrorWire {
            error: self.message,
            category: self.category.to_string(),
        };
        (self.status, Json(body)).into_response()
    }
}

async fn points(State(state): State<Arc<ServiceState>>) -> Json<PointsResponse> {
    let points = state
        .table
        .ids()
        .filter_map(|id| state.embedding.get(id))
        .map(|p| PointWire {
            id: p.id.clone(),
            x: p.x,
            y: p.y,
        })
        .collect();
    Json(PointsResponse {
        points,
        bbox: state.embedding.bbox().with_margin(VIEW_MARGIN),
        dim: state.table.dim(),
    })
}

async fn synthesize(
    State(state): State<Arc<ServiceState>>,
    body: Bytes,
) -> Result<Json<SynthesizeResponseWire>, ApiError> {
    let req: SynthesizeRequestWire =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("malformed request: {e}")))?;
    if !(req.x.is_finite() && req.y.is_finite()) {
        return Err(ApiError::bad_request("coordinates must be finite"));
    }
    validate_text(&req.text)?;

    let nearest = state
        .index
        .nearest(req.x, req.y, 1)
        .map_err(|e| ApiError::internal(e.to_string()))?
        .remove(0);
    let point = state
        .embedding
        .get(&nearest.id)
        .ok_or_else(|| ApiError::internal(format!("point {} vanished", nearest.id)))?;
    let latent = state
        .table
        .get_latent(&nearest.id)
        .map_err(|e| ApiError::internal(e.to_string()))?
        .clone();
    let digest = audio_digest(&req.text, &nearest.id, state.backend.tag());

    let request = SynthesisRequest::new(req.text, latent.clone());
    let worker = state.clone();
    let (_, created) = state
        .cache
        .get_or_create(&digest, || async move {
            let bytes = tokio::task::spawn_blocking(move || {
                let result = worker.backend.synthesize(&request)?;
                Ok::<_, SynthesisError>(encode_wav(&result.audio)?)
            })
            .await
            .map_err(|e| ApiError::internal(format!("synthesis task failed: {e}")))??;
            Ok::<_, ApiError>(bytes)
        })
        .await?;
    tracing::info!(point = %nearest.id, %digest, created, "synthesize");

    Ok(Json(SynthesizeResponseWire {
        audio_url: format!("/api/audio/{digest}.wav"),
        utterance: digest,
        point_id: nearest.id,
        latent: latent.0,
        x: point.x,
        y: point.y,
    }))
}

async fn audio(State(state): State<Arc<ServiceState>>, Path(file): Path<String>) -> Result<Response, ApiError> {
    let digest = file
        .strip_suffix(".wav")
        .filter(|d| is_digest(d))
        .ok_or_else(|| ApiError::not_found(format!("no audio named {file:?}")))?;
    let bytes = match tokio::fs::read(state.cache.path_for(digest)).await {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(ApiError::not_found(format!("unknown utterance {digest}")))
        }
        Err(e) => return Err(e.into()),
    };
    Ok(([(header::CONTENT_TYPE, "audio/wav")], bytes).into_response())
}

/// Builds the router; `static_dir`, when given, is served at `/`.
pub fn router(state: Arc<ServiceState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/points", get(points))
        .route("/api/synthesize", post(synthesize))
        .route("/api/audio/{file}", get(audio))
        .with_state(state);
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(TraceLayer::new_for_http())
}

/// Serves `app` on an already-bound listener until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let addr: SocketAddr = listener.local_addr()?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}
