//! HTTP routes.
//!
//! | route | body | response |
//! |---|---|---|
//! | `GET /v1/health` | | `{status, version}` |
//! | `POST /v1/analyze/text` | `{id?, text, options?}` | report |
//! | `POST /v1/analyze/image` | multipart `image`, `id?`, `options?` | report |
//! | `POST /v1/analyze/batch/text` | CSV | counts plus output CSV |
//! | `POST /v1/risk/assess` | `{description, k_risks?, k_mit?}` | assessment, or CSV with `Accept: text/csv` |
//! | `GET /v1/telemetry` | | process totals |
//!
//! Errors are `{"error": {"kind", "message"}}`. Analysis runs on the blocking
//! pool so backend calls never stall the async workers.

use std::future::Future;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fairsense_core::fusion::FusionWeights;
use fairsense_core::image::{ImageInput, MediaType};
use fairsense_core::index::{EmbeddingProvider, VectorIndex};
use fairsense_core::risk::{assess, to_csv, AssessOptions};
use fairsense_core::telemetry::record;
use fairsense_core::{Engine, Error};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::net::TcpListener;

use crate::batch::{analyze_text_csv, FailureRow};
use crate::config::{BodyLimits, ConfigError, EngineConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Loaded risk and framework indexes with the embedder that built them.
pub struct RiskIndexes {
    pub risks: VectorIndex,
    pub rmf: VectorIndex,
    pub embedder: Arc<dyn EmbeddingProvider>,
}

/// Everything a request handler reads. Immutable once built.
pub struct AppState {
    pub engine: Engine,
    pub risk: Option<RiskIndexes>,
    pub limits: BodyLimits,
    pub batch_workers: usize,
}

impl AppState {
    /// Build from config, loading every referenced file. Any failure aborts
    /// the whole load.
    pub fn from_config(cfg: &EngineConfig) -> Result<Self, ConfigError> {
        let limiter = cfg.limiter();
        let engine = cfg.engine(&limiter)?;
        let risk = match cfg.indexes()? {
            None => None,
            Some((risks, rmf)) => {
                let embedder = cfg.embedder(limiter)?.ok_or_else(|| {
                    ConfigError::Invalid("indexes are configured but [embedding] is none".into())
                })?;
                let tag = embedder.tag();
                for (name, index) in [("risks", &risks), ("rmf", &rmf)] {
                    if index.embedder_tag() != tag {
                        return Err(ConfigError::Invalid(format!(
                            "{name} index was built with {:?} but the configured embedder is {tag:?}",
                            index.embedder_tag()
                        )));
                    }
                }
                Some(RiskIndexes {
                    risks,
                    rmf,
                    embedder,
                })
            }
        };
        Ok(Self {
            engine,
            risk,
            limits: cfg.limits.clone(),
            batch_workers: cfg.batch.workers,
        })
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            kind: "input",
            message: message.into(),
        }
    }
}

fn classify(e: &Error) -> (StatusCode, &'static str) {
    use StatusCode as S;
    match e {
        Error::Input(_) => (S::BAD_REQUEST, "input"),
        Error::Decode(_) => (S::BAD_REQUEST, "decode"),
        Error::Format(_) => (S::UNSUPPORTED_MEDIA_TYPE, "format"),
        Error::Range { .. } => (S::BAD_REQUEST, "range"),
        Error::DegenerateWeights(_) => (S::BAD_REQUEST, "degenerate_weights"),
        Error::EmptyComponents => (S::BAD_REQUEST, "empty_components"),
        Error::Schema(_) => (S::BAD_REQUEST, "schema"),
        Error::UnanalyzableImage => (S::UNPROCESSABLE_ENTITY, "unanalyzable_image"),
        Error::EmptyIndex => (S::SERVICE_UNAVAILABLE, "empty_index"),
        Error::Timeout { .. } => (S::GATEWAY_TIMEOUT, "timeout"),
        Error::Status { .. } | Error::Transport(_) | Error::Protocol(_) => (S::BAD_GATEWAY, "backend"),
        Error::Adapter(_) => (S::BAD_GATEWAY, "adapter"),
        _ => (S::INTERNAL_SERVER_ERROR, "internal"),
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, kind) = classify(&e);
        Self {
            status,
            kind,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"kind": self.kind, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> Result<T, Error> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            kind: "internal",
            message: format!("analysis task failed: {e}"),
        })?
        .map_err(ApiError::from)
}

fn parse_json<'a, T: Deserialize<'a>>(body: &'a [u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

fn wants_csv(headers: &HeaderMap) -> bool {
    headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("text/csv"))
}

fn csv_response(body: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], body).into_response()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeOptions {
    pub weights: Option<FusionWeights>,
}

#[derive(Debug, Deserialize)]
pub struct AnalyzeTextRequest {
    pub id: Option<String>,
    pub text: String,
    #[serde(default)]
    pub options: AnalyzeOptions,
}

fn engine_with(state: &AppState, options: &AnalyzeOptions) -> Engine {
    let mut engine = state.engine.clone();
    if let Some(w) = options.weights {
        engine.weights = w;
    }
    engine
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({"status": "ok", "version": VERSION}))
}

async fn analyze_text(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let req: AnalyzeTextRequest = parse_json(&body)?;
    let engine = engine_with(&state, &req.options);
    let report = blocking(move || engine.analyze_text(req.id.as_deref(), &req.text)).await?;
    Ok(Json(report).into_response())
}

async fn analyze_image(State(state): State<Arc<AppState>>, mut form: Multipart) -> ApiResult<Response> {
    let mut image: Option<(Vec<u8>, Option<String>)> = None;
    let mut id = String::new();
    let mut options = AnalyzeOptions::default();
    while let Some(field) = form
        .next_field()
        .await
        .map_err(|e| ApiError::bad_request(format!("malformed multipart body: {e}")))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let content_type = field.content_type().map(str::to_string);
        let data = field
            .bytes()
            .await
            .map_err(|e| ApiError::bad_request(format!("cannot read field {name:?}: {e}")))?;
        match name.as_str() {
            "image" => image = Some((data.to_vec(), content_type)),
            "id" => id = String::from_utf8_lossy(&data).into_owned(),
            "options" => options = parse_json(&data)?,
            other => return Err(ApiError::bad_request(format!("unexpected field {other:?}"))),
        }
    }
    let (bytes, content_type) = image.ok_or_else(|| ApiError::bad_request("missing `image` field"))?;
    let media_type = match content_type.as_deref() {
        Some(ct) if ct != "application/octet-stream" => MediaType::from_mime(ct)?,
        _ => MediaType::sniff(&bytes)?,
    };
    let engine = engine_with(&state, &options);
    let img = ImageInput::new(id, bytes, media_type);
    let report = blocking(move || engine.analyze_image(&img)).await?;
    Ok(Json(report).into_response())
}

#[derive(Debug, Serialize)]
struct BatchResponse {
    input_count: usize,
    success_count: usize,
    failure_rows: Vec<FailureRow>,
    output_csv: String,
}

async fn analyze_batch_text(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let engine = state.engine.clone();
    let workers = state.batch_workers;
    let out = blocking(move || analyze_text_csv(body.as_ref(), &engine, workers)).await?;
    if wants_csv(&headers) {
        return Ok(csv_response(out.csv));
    }
    Ok(Json(BatchResponse {
        input_count: out.input_count,
        success_count: out.success_count,
        failure_rows: out.failure_rows,
        output_csv: String::from_utf8_lossy(&out.csv).into_owned(),
    })
    .into_response())
}

#[derive(Debug, Deserialize)]
pub struct AssessRequest {
    pub description: String,
    pub k_risks: Option<usize>,
    pub k_mit: Option<usize>,
}

async fn risk_assess(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let req: AssessRequest = parse_json(&body)?;
    if req.description.trim().is_empty() {
        return Err(ApiError::bad_request("description must be non-empty"));
    }
    if state.risk.is_none() {
        return Err(ApiError {
            status: StatusCode::SERVICE_UNAVAILABLE,
            kind: "not_configured",
            message: "risk indexes are not configured".into(),
        });
    }
    let defaults = AssessOptions::default();
    let opts = AssessOptions {
        k_risks: req.k_risks.unwrap_or(defaults.k_risks),
        k_mit: req.k_mit.unwrap_or(defaults.k_mit),
    };
    let st = state.clone();
    let assessment = blocking(move || {
        let risk = st.risk.as_ref().expect("checked above");
        let (a, usage) = assess(&req.description, &risk.risks, &risk.rmf, risk.embedder.as_ref(), opts)?;
        st.engine.telemetry.add(&record(&usage, &st.engine.energy));
        Ok(a)
    })
    .await?;
    if wants_csv(&headers) {
        return Ok(csv_response(to_csv(&assessment)));
    }
    Ok(Json(assessment).into_response())
}

async fn telemetry(State(state): State<Arc<AppState>>) -> Response {
    Json(state.engine.telemetry.snapshot()).into_response()
}

pub fn router(state: Arc<AppState>) -> Router {
    let text_limit = DefaultBodyLimit::max(state.limits.text_bytes);
    let image_limit = DefaultBodyLimit::max(state.limits.image_bytes);
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/analyze/text", post(analyze_text).layer(text_limit))
        .route("/v1/analyze/image", post(analyze_image).layer(image_limit))
        .route("/v1/analyze/batch/text", post(analyze_batch_text).layer(image_limit))
        .route("/v1/risk/assess", post(risk_assess).layer(text_limit))
        .route("/v1/telemetry", get(telemetry))
        .with_state(state)
}

/// Serve until `shutdown` resolves, then let in-flight requests finish.
pub async fn run(
    listener: TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
