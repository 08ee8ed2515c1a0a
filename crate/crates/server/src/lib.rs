//! HTTP interface over the run store: create and poll runs, review gated
//! checkpoints, validate SCXML and screen dataset records.

mod error;
mod openapi;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path as UrlPath, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use lifegen_core::artifact::{read_jsonl, LifecycleRecord, Stage};
use lifegen_core::dataset::{append_decision, read_decisions, review_status, ReviewDecision, ReviewStatus};
use lifegen_core::gateway::{read_transcript, Backend, BackendSet};
use lifegen_core::pipeline::{Pipeline, RunRequest, RunSpec, RunState, RunStatus, DEFAULT_GATES};
use lifegen_core::scxml;

pub use error::ApiError;
pub use openapi::document as openapi_document;

/// Environment variable holding the optional bearer token.
pub const TOKEN_ENV: &str = "LIFEGEN_API_TOKEN";

struct Inner {
    pipeline: Pipeline,
    backends: BackendSet,
    built: Mutex<HashMap<String, Arc<dyn Backend>>>,
    token: Option<String>,
    dataset: Option<PathBuf>,
    decisions: Option<PathBuf>,
    decisions_lock: Mutex<()>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(pipeline: Pipeline, backends: BackendSet) -> Self {
        AppState(Arc::new(Inner {
            pipeline,
            backends,
            built: Mutex::new(HashMap::new()),
            token: None,
            dataset: None,
            decisions: None,
            decisions_lock: Mutex::new(()),
        }))
    }

    fn inner_mut(&mut self) -> &mut Inner {
        Arc::get_mut(&mut self.0).expect("configure AppState before sharing it")
    }

    /// Requires `Authorization: Bearer <token>` on every API route.
    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.inner_mut().token = token.filter(|t| !t.is_empty());
        self
    }

    /// Enables the dataset screening endpoints.
    pub fn with_dataset(mut self, records: PathBuf, decisions: PathBuf) -> Self {
        let inner = self.inner_mut();
        inner.dataset = Some(records);
        inner.decisions = Some(decisions);
        self
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.0.pipeline
    }

    /// Backends are built once per name and shared, so scripted queues carry
    /// over between requests.
    pub fn backend(&self, name: &str) -> Result<Arc<dyn Backend>, ApiError> {
        let mut built = self.0.built.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(b) = built.get(name) {
            return Ok(b.clone());
        }
        let b = self.0.backends.build(name).map_err(|e| {
            let code = if self.0.backends.get(name).is_err() {
                "unknown_backend"
            } else {
                "internal"
            };
            let status = if code == "unknown_backend" {
                StatusCode::BAD_REQUEST
            } else {
                StatusCode::INTERNAL_SERVER_ERROR
            };
            ApiError::new(status, code, e.to_string())
        })?;
        built.insert(name.to_string(), b.clone());
        Ok(b)
    }
}

pub fn router(state: AppState, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/runs", post(create_run).get(list_runs))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/artifact", patch(edit_artifact))
        .route("/runs/{id}/approve", post(approve_run))
        .route("/runs/{id}/transcript", get(get_transcript))
        .route("/scxml/validate", post(validate_scxml))
        .route("/dataset/records", get(list_records))
        .route("/dataset/decisions", post(post_decision))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token))
        .route("/spec", get(|| async { Json(openapi::document()) }));
    let api = match ui_dir {
        Some(dir) => api.nest_service("/ui", ServeDir::new(dir)),
        None => api.route("/ui", get(no_ui)),
    };
    api.with_state(state)
}

pub async fn serve(addr: SocketAddr, state: AppState, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state, ui_dir.as_deref())).await
}

async fn no_ui() -> Html<&'static str> {
    Html("<!doctype html><title>lifegen</title><p>No review UI bundle is configured. Start the server with <code>--ui-dir</code>.</p>")
}

async fn require_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.0.token {
        let given = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return ApiError::new(
                StatusCode::UNAUTHORIZED,
                "unauthorized",
                "missing or wrong bearer token",
            )
            .into_response();
        }
    }
    next.run(req).await
}

fn json_body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::invalid_body(e.body_text()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRun {
    intent: String,
    #[serde(default)]
    mode: Option<String>,
    #[serde(default)]
    backend: Option<String>,
    #[serde(default)]
    gates: Option<Vec<String>>,
    #[serde(default)]
    target_stage: Option<String>,
    #[serde(default)]
    record_id: Option<String>,
}

/// The list view of a run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunSummary {
    pub run_id: String,
    pub status: RunStatus,
    pub mode: lifegen_core::pipeline::RunMode,
    pub backend: String,
    pub checkpoint_stage: Option<Stage>,
    pub intent_excerpt: String,
    pub created_at: String,
    pub updated_at: String,
}

impl From<&RunState> for RunSummary {
    fn from(s: &RunState) -> Self {
        let mut excerpt: String = s.input_intent.chars().take(120).collect();
        if excerpt.len() < s.input_intent.len() {
            excerpt.push('…');
        }
        RunSummary {
            run_id: s.run_id.clone(),
            status: s.status,
            mode: s.mode,
            backend: s.backend.clone(),
            checkpoint_stage: s.checkpoint_stage,
            intent_excerpt: excerpt,
            created_at: s.created_at.clone(),
            updated_at: s.updated_at.clone(),
        }
    }
}

fn parse_stage(s: &str) -> Result<Stage, ApiError> {
    s.parse()
        .map_err(|_| ApiError::invalid_body(format!("unknown stage `{s}`")))
}

fn run_spec(body: &CreateRun) -> Result<RunSpec, ApiError> {
    let gates = body
        .gates
        .as_ref()
        .map(|g| g.iter().map(|s| parse_stage(s)).collect::<Result<Vec<_>, _>>())
        .transpose()?;
    let mode = body.mode.as_deref().unwrap_or("multi_step");
    match mode.replace('-', "_").as_str() {
        "multi_step" | "multi" => Ok(RunSpec::gated(gates.unwrap_or_default())),
        "gated" => Ok(RunSpec::gated(gates.unwrap_or_else(|| DEFAULT_GATES.to_vec()))),
        "one_step" | "one" => {
            let target = body
                .target_stage
                .as_deref()
                .map(parse_stage)
                .transpose()?
                .unwrap_or(Stage::Code);
            Ok(RunSpec::OneStep { target })
        }
        _ => Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_mode",
            format!("unknown mode `{mode}`"),
        )),
    }
}

fn continue_in_background(state: &AppState, run_id: String, backend: Arc<dyn Backend>, approved: bool) {
    let pipeline = state.pipeline().clone();
    tokio::task::spawn_blocking(move || {
        let out = if approved {
            pipeline.execute_approved(&run_id, &*backend)
        } else {
            pipeline.execute(&run_id, &*backend)
        };
        if let Err(e) = out {
            eprintln!("run {run_id}: {e}");
        }
    });
}

async fn create_run(
    State(state): State<AppState>,
    payload: Result<Json<CreateRun>, JsonRejection>,
) -> Result<(StatusCode, Json<RunSummary>), ApiError> {
    let body = json_body(payload)?;
    let spec = run_spec(&body)?;
    let backend = state.backend(body.backend.as_deref().unwrap_or("echo"))?;
    let request = RunRequest {
        intent: body.intent,
        record_id: body.record_id,
    };
    let (st, b) = (state.clone(), backend.clone());
    let run = blocking(move || Ok(st.pipeline().create(&request, &spec, &*b)?)).await?;
    continue_in_background(&state, run.run_id.clone(), backend, false);
    Ok((StatusCode::CREATED, Json(RunSummary::from(&run))))
}

#[derive(Debug, Deserialize)]
struct ListQuery {
    status: Option<String>,
}

async fn list_runs(
    State(state): State<AppState>,
    query: Result<Query<ListQuery>, QueryRejection>,
) -> Result<Json<Vec<RunSummary>>, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_query", e.body_text()))?;
    let status = q
        .status
        .map(|s| {
            s.parse::<RunStatus>()
                .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_query", e))
        })
        .transpose()?;
    let runs = blocking(move || {
        state
            .pipeline()
            .store()
            .list(status)
            .map_err(|e| ApiError::internal(e.to_string()))
    })
    .await?;
    Ok(Json(runs.iter().map(RunSummary::from).collect()))
}

async fn get_run(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<RunState>, ApiError> {
    Ok(Json(blocking(move || Ok(state.pipeline().load(&id)?)).await?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArtifactEdit {
    stage: String,
    text: String,
}

async fn edit_artifact(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    payload: Result<Json<ArtifactEdit>, JsonRejection>,
) -> Result<Json<RunState>, ApiError> {
    let body = json_body(payload)?;
    let stage = parse_stage(&body.stage)?;
    Ok(Json(
        blocking(move || Ok(state.pipeline().edit_artifact(&id, stage, &body.text)?)).await?,
    ))
}

async fn approve_run(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<RunState>, ApiError> {
    let st = state.clone();
    let run = blocking(move || Ok(st.pipeline().approve(&id)?)).await?;
    let backend = state.backend(&run.backend)?;
    continue_in_background(&state, run.run_id.clone(), backend, true);
    Ok(Json(run))
}

async fn get_transcript(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Vec<lifegen_core::gateway::TranscriptEntry>>, ApiError> {
    blocking(move || {
        state.pipeline().load(&id)?;
        let path = state.pipeline().store().transcript_path(&id);
        if !path.exists() {
            return Ok(Json(Vec::new()));
        }
        read_transcript(&path)
            .map(Json)
            .map_err(|e| ApiError::internal(e.to_string()))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScxmlText {
    text: String,
}

async fn validate_scxml(payload: Result<Json<ScxmlText>, JsonRejection>) -> Result<Json<scxml::ScxmlReport>, ApiError> {
    let body = json_body(payload)?;
    Ok(Json(scxml::check(&body.text)))
}

#[derive(Debug, Deserialize)]
struct RecordQuery {
    status: Option<ReviewStatus>,
}

/// A dataset record with its screening status.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReviewItem {
    pub status: ReviewStatus,
    pub record: LifecycleRecord,
}

fn dataset_paths(state: &AppState) -> Result<(PathBuf, PathBuf), ApiError> {
    match (&state.0.dataset, &state.0.decisions) {
        (Some(d), Some(r)) => Ok((d.clone(), r.clone())),
        _ => Err(ApiError::not_found("no dataset is configured on this server")),
    }
}

async fn list_records(
    State(state): State<AppState>,
    query: Result<Query<RecordQuery>, QueryRejection>,
) -> Result<Json<Vec<ReviewItem>>, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_query", e.body_text()))?;
    let (records_path, decisions_path) = dataset_paths(&state)?;
    blocking(move || {
        let records = read_jsonl(&records_path).map_err(|e| ApiError::internal(e.to_string()))?;
        let decisions = read_decisions(&decisions_path)?;
        Ok(Json(
            records
                .into_iter()
                .map(|record| ReviewItem {
                    status: review_status(&record.id, &decisions),
                    record,
                })
                .filter(|item| q.status.is_none_or(|s| s == item.status))
                .collect(),
        ))
    })
    .await
}

async fn post_decision(
    State(state): State<AppState>,
    payload: Result<Json<ReviewDecision>, JsonRejection>,
) -> Result<(StatusCode, Json<ReviewDecision>), ApiError> {
    let decision = json_body(payload)?;
    if decision.reviewer.trim().is_empty() {
        return Err(ApiError::invalid_body("reviewer must not be empty"));
    }
    let (records_path, decisions_path) = dataset_paths(&state)?;
    blocking(move || {
        let records = read_jsonl(&records_path).map_err(|e| ApiError::internal(e.to_string()))?;
        if !records.iter().any(|r| r.id == decision.record_id) {
            return Err(ApiError::not_found(format!(
                "record `{}` not found",
                decision.record_id
            )));
        }
        let _guard = state.0.decisions_lock.lock().unwrap_or_else(|e| e.into_inner());
        append_decision(&decisions_path, &decision)?;
        Ok((StatusCode::CREATED, Json(decision)))
    })
    .await
}
