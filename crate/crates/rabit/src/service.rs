//! JSON-over-HTTP facade under `/api/v1`.

use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::State;
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream;
use rabit_core::Error as CoreError;
use serde::Serialize;
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::commands::{self, SweepPlan, SERVICE_MAX_REPLICATES};
use crate::config::RunConfig;
use crate::engine::Engine;
use crate::error::{core_field_errors, is_core_validation, AppError, FieldError};

/// Default bound on rows per sweep request.
pub const DEFAULT_MAX_SWEEP_ROWS: u128 = 100_000;
pub const DEFAULT_PORT: u16 = 8080;
/// Sweep rows computed per streamed batch.
const SWEEP_BATCH: usize = 16;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub tolerance: f64,
    pub max_sweep_rows: u128,
    /// `None` allows any origin.
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            tolerance: rabit_core::tail::DEFAULT_TOLERANCE,
            max_sweep_rows: DEFAULT_MAX_SWEEP_ROWS,
            cors_origin: None,
        }
    }
}

impl ServiceConfig {
    /// Reads `RABIT_TOLERANCE`, `RABIT_MAX_SWEEP_ROWS` and `RABIT_CORS_ORIGIN`.
    pub fn from_env() -> Result<Self, AppError> {
        let mut c = ServiceConfig { tolerance: crate::config::env_tolerance()?, ..Self::default() };
        if let Ok(v) = std::env::var("RABIT_MAX_SWEEP_ROWS") {
            c.max_sweep_rows = v
                .trim()
                .parse()
                .map_err(|e: std::num::ParseIntError| AppError::field("RABIT_MAX_SWEEP_ROWS", e.to_string()))?;
        }
        c.cors_origin = std::env::var("RABIT_CORS_ORIGIN").ok().filter(|s| !s.is_empty());
        rabit_core::TailSettings::with_tolerance(c.tolerance)
            .validate()
            .map_err(|e| AppError::field("RABIT_TOLERANCE", e.to_string()))?;
        Ok(c)
    }
}

struct AppState {
    engine: Engine,
    config: ServiceConfig,
}

type Shared = Arc<AppState>;

pub fn router(config: ServiceConfig) -> Router {
    let cors = match &config.cors_origin {
        Some(origin) => match HeaderValue::from_str(origin) {
            Ok(v) => CorsLayer::permissive().allow_origin(AllowOrigin::exact(v)),
            Err(_) => CorsLayer::permissive(),
        },
        None => CorsLayer::permissive(),
    };
    let state = Arc::new(AppState { engine: Engine::new(), config });
    Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/evaluate", post(evaluate))
        .route("/api/v1/forecast", post(forecast))
        .route("/api/v1/sweep/allocation", post(sweep))
        .route("/api/v1/solve-n", post(solve_n))
        .route("/api/v1/simulate", post(simulate))
        .layer(cors)
        .with_state(state)
}

pub async fn serve(addr: std::net::SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("rabit service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") }))
}

/// An error response: 400 for bad input, 413 for oversized sweeps,
/// 422 when the design has no solution, 500 otherwise.
pub struct ApiError(AppError);

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        ApiError(e)
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        ApiError(AppError::Core(e))
    }
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match &self.0 {
            AppError::Invalid(_) => StatusCode::BAD_REQUEST,
            AppError::SweepTooLarge { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            AppError::Core(CoreError::NoRoot { .. } | CoreError::Unattainable { .. }) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            AppError::Core(e) if is_core_validation(e) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

fn error_kind(e: &AppError) -> &'static str {
    match e {
        AppError::Invalid(_) => "InvalidInput",
        AppError::SweepTooLarge { .. } => "SweepTooLarge",
        AppError::Core(CoreError::NoRoot { .. }) => "NoRoot",
        AppError::Core(CoreError::Unattainable { .. }) => "Unattainable",
        AppError::Core(e) if is_core_validation(e) => "InvalidInput",
        _ => "Internal",
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let fields: Vec<FieldError> = match &self.0 {
            AppError::Invalid(f) => f.clone(),
            AppError::Core(e) if is_core_validation(e) => core_field_errors(e, "design."),
            _ => Vec::new(),
        };
        let body = json!({
            "error": error_kind(&self.0),
            "message": self.0.to_string(),
            "fields": fields,
        });
        (self.status(), Json(body)).into_response()
    }
}

fn parse(body: &Bytes) -> Result<RunConfig, ApiError> {
    let text = std::str::from_utf8(body).map_err(|e| AppError::field("", e.to_string()))?;
    Ok(RunConfig::from_json(text)?)
}

/// Runs CPU-bound work off the async workers.
async fn blocking<T, F>(state: &Shared, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Engine, &ServiceConfig) -> Result<T, AppError> + Send + 'static,
{
    let state = Arc::clone(state);
    tokio::task::spawn_blocking(move || f(&state.engine, &state.config))
        .await
        .map_err(|e| ApiError(AppError::io("<worker>", std::io::Error::other(e.to_string()))))?
        .map_err(ApiError)
}

fn ok<T: Serialize>(value: T) -> Response {
    (StatusCode::OK, Json(value)).into_response()
}

async fn evaluate(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let cfg = parse(&body)?;
    let report = blocking(&state, move |e, c| commands::evaluate(e, &cfg, c.tolerance)).await?;
    Ok(ok(report))
}

async fn forecast(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let cfg = parse(&body)?;
    let report = blocking(&state, move |e, c| commands::forecast(e, &cfg, c.tolerance)).await?;
    Ok(ok(report))
}

async fn solve_n(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let cfg = parse(&body)?;
    let report = blocking(&state, move |e, c| commands::solve_n(e, &cfg, c.tolerance)).await?;
    Ok(ok(report))
}

async fn simulate(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let cfg = parse(&body)?;
    let report = blocking(&state, move |e, c| {
        commands::simulate(e, &cfg, c.tolerance, Some(SERVICE_MAX_REPLICATES))
    })
    .await?;
    Ok(ok(report))
}

/// Streams one JSON object per line in sweep order. Inputs are validated
/// before the first byte; a numeric failure mid-stream ends the stream with
/// an `{"error": ...}` line.
async fn sweep(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let cfg = parse(&body)?;
    let plan = SweepPlan::new(&cfg, state.config.tolerance, state.config.max_sweep_rows)?;
    let rows = plan.allocations.len();
    let (tx, rx) = tokio::sync::mpsc::channel::<Bytes>(4);
    let worker = Arc::clone(&state);
    tokio::task::spawn_blocking(move || {
        for batch in plan.allocations.chunks(SWEEP_BATCH) {
            let mut out = Vec::new();
            let stop = match worker.engine.sweep_rows(&plan.base, batch, &plan.settings) {
                Ok(rows) => {
                    for r in rows {
                        let _ = serde_json::to_writer(&mut out, &r);
                        out.push(b'\n');
                    }
                    false
                }
                Err(e) => {
                    let _ = serde_json::to_writer(
                        &mut out,
                        &json!({ "error": error_kind(&AppError::Core(e.clone())), "message": e.to_string() }),
                    );
                    out.push(b'\n');
                    true
                }
            };
            if tx.blocking_send(Bytes::from(out)).is_err() || stop {
                break;
            }
        }
    });
    let body = stream::unfold(rx, |mut rx| async move {
        rx.recv().await.map(|b| (Ok::<_, std::io::Error>(b), rx))
    });
    Ok(Response::builder()
        .status(StatusCode::OK)
        .header(header::CONTENT_TYPE, "application/x-ndjson")
        .header("x-sweep-rows", rows)
        .body(Body::from_stream(body))
        .expect("static response parts are valid"))
}
