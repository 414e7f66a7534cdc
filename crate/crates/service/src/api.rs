//! JSON over HTTP. Schemas and error bodies are documented in `docs/API.md`.
//!
//! Handlers read one immutable snapshot of the session, compute on the
//! blocking pool, and echo the snapshot version so a client can tell which
//! scenario a result belongs to. Identical requests against the same version
//! give byte-identical bodies.

use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use flexnet_core::ratemodel::Allocation;
use flexnet_core::tomography::SamplerConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ops::{self, OpError, PlanRequest, ScanRequest};
use crate::scenario::{assignments_to_allocation, Assignment, FieldError, Scenario, ScenarioFile};
use crate::store::{SessionStore, StoreError};

const DOCS: &str = "docs/API.md";

/// Longest Monte Carlo run the API will start, in simulated seconds.
pub const MAX_SIMULATION_S: f64 = 100.0;

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub status: u16,
    pub kind: &'static str,
    pub message: String,
    /// Where the expected request shape is documented.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub current_version: Option<u64>,
}

#[derive(Debug)]
pub struct ApiError(ErrorBody);

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self(ErrorBody {
            status: status.as_u16(),
            kind,
            message: message.into(),
            schema: None,
            fields: Vec::new(),
            current_version: None,
        })
    }

    fn with_schema(mut self, anchor: &str) -> Self {
        self.0.schema = Some(format!("{DOCS}#{anchor}"));
        self
    }

    fn op(e: OpError, anchor: &str) -> Self {
        match e {
            OpError::Invalid(m) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-request", m).with_schema(anchor),
            OpError::Infeasible(m) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "infeasible", m),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::NotFound(_) => Self::new(StatusCode::NOT_FOUND, "not-found", message),
            StoreError::Exists(_) => Self::new(StatusCode::CONFLICT, "exists", message),
            StoreError::Conflict { current, .. } => {
                let mut err = Self::new(StatusCode::CONFLICT, "version-conflict", message);
                err.0.current_version = Some(current);
                err
            }
            StoreError::Invalid(fields) => {
                let mut err = Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-scenario", message)
                    .with_schema("scenario");
                err.0.fields = fields;
                err
            }
            StoreError::Io(_) => Self::internal(message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(serde_json::json!({ "error": self.0 }))).into_response()
    }
}

/// Request types name the section of the API document describing them.
pub trait Schema {
    const ANCHOR: &'static str;
}

/// JSON body whose rejection points at the documented schema.
pub struct Body<T>(pub T);

impl<S, T> FromRequest<S> for Body<T>
where
    T: DeserializeOwned + Schema,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(value)) => Ok(Body(value)),
            Err(rejection) => Err(body_error(rejection, T::ANCHOR)),
        }
    }
}

fn body_error(rejection: JsonRejection, anchor: &str) -> ApiError {
    ApiError::new(rejection.status(), "malformed-body", rejection.body_text()).with_schema(anchor)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEdit {
    pub expected_version: u64,
    pub scenario: ScenarioFile,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationEdit {
    pub expected_version: u64,
    /// `null` clears the stored allocation.
    pub allocation: Option<Vec<Assignment>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictRequest {
    /// What-if assignment; the stored one when absent.
    pub allocation: Option<Vec<Assignment>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    pub seed: u64,
    pub duration_s: Option<f64>,
    pub allocation: Option<Vec<Assignment>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBody {
    pub seed: u64,
    pub channels: Option<Vec<usize>>,
    pub sampler: Option<SamplerConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossQuery {
    pub from: Option<usize>,
    pub to: Option<usize>,
}

impl Schema for ScenarioEdit {
    const ANCHOR: &'static str = "scenario-edit";
}
impl Schema for AllocationEdit {
    const ANCHOR: &'static str = "allocation-edit";
}
impl Schema for PlanRequest {
    const ANCHOR: &'static str = "plan-request";
}
impl Schema for PredictRequest {
    const ANCHOR: &'static str = "predict-request";
}
impl Schema for SimulateRequest {
    const ANCHOR: &'static str = "simulate-request";
}
impl Schema for ScanBody {
    const ANCHOR: &'static str = "fidelity-scan-request";
}

#[derive(Serialize)]
struct Versioned<T> {
    version: u64,
    result: T,
}

#[derive(Serialize)]
struct ScenarioView<'a> {
    version: u64,
    scenario: &'a Scenario,
}

#[derive(Serialize)]
struct VersionOnly {
    version: u64,
}

fn json<T: Serialize>(value: &T) -> Result<Response, ApiError> {
    let bytes = serde_json::to_vec(value).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(([(axum::http::header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn blocking<F>(work: F) -> Result<Response, ApiError>
where
    F: FnOnce() -> Result<Response, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(work)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn allocation_from(assignments: &[Assignment], anchor: &str) -> Result<Allocation, ApiError> {
    let mut seen = std::collections::BTreeSet::new();
    for a in assignments {
        if !seen.insert(a.channel) {
            return Err(ApiError::op(
                OpError::Invalid(format!("channel {} assigned twice", a.channel)),
                anchor,
            ));
        }
    }
    Ok(assignments_to_allocation(assignments))
}

#[derive(Clone)]
struct App {
    store: Arc<SessionStore>,
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/sessions", get(list_sessions))
        .route("/api/v1/sessions/{name}/scenario", get(get_scenario).put(put_scenario))
        .route("/api/v1/sessions/{name}/allocation", put(put_allocation))
        .route("/api/v1/sessions/{name}/plan", post(plan))
        .route("/api/v1/sessions/{name}/predict", post(predict))
        .route("/api/v1/sessions/{name}/simulate", post(simulate))
        .route("/api/v1/sessions/{name}/loss-table", get(loss_table))
        .route("/api/v1/sessions/{name}/fidelity-scan", post(fidelity_scan))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not-found", "no such endpoint").with_schema("endpoints") })
        .with_state(App { store })
}

async fn health() -> Response {
    Json(serde_json::json!({ "status": "ok" })).into_response()
}

async fn list_sessions(State(app): State<App>) -> Result<Response, ApiError> {
    blocking(move || json(&serde_json::json!({ "sessions": app.store.sessions()? }))).await
}

async fn get_scenario(State(app): State<App>, Path(name): Path<String>) -> Result<Response, ApiError> {
    blocking(move || {
        let snap = app.store.get(&name)?;
        json(&ScenarioView {
            version: snap.version,
            scenario: &snap.scenario,
        })
    })
    .await
}

async fn put_scenario(
    State(app): State<App>,
    Path(name): Path<String>,
    Body(edit): Body<ScenarioEdit>,
) -> Result<Response, ApiError> {
    blocking(move || {
        let scenario = Scenario::from_file(edit.scenario).map_err(StoreError::Invalid)?;
        let snap = app.store.update(&name, edit.expected_version, &scenario)?;
        json(&VersionOnly { version: snap.version })
    })
    .await
}

async fn put_allocation(
    State(app): State<App>,
    Path(name): Path<String>,
    Body(edit): Body<AllocationEdit>,
) -> Result<Response, ApiError> {
    blocking(move || {
        let snap = app.store.get(&name)?;
        if snap.version != edit.expected_version {
            return Err(StoreError::Conflict {
                expected: edit.expected_version,
                current: snap.version,
            }
            .into());
        }
        let mut scenario = snap.scenario;
        if let Some(a) = &edit.allocation {
            allocation_from(a, AllocationEdit::ANCHOR)?;
        }
        scenario.allocation = edit.allocation;
        let snap = app.store.update(&name, edit.expected_version, &scenario)?;
        json(&VersionOnly { version: snap.version })
    })
    .await
}

async fn plan(
    State(app): State<App>,
    Path(name): Path<String>,
    Body(request): Body<PlanRequest>,
) -> Result<Response, ApiError> {
    blocking(move || {
        let snap = app.store.get(&name)?;
        let result = ops::plan(&snap.scenario, &request).map_err(|e| ApiError::op(e, PlanRequest::ANCHOR))?;
        json(&Versioned {
            version: snap.version,
            result,
        })
    })
    .await
}

async fn predict(
    State(app): State<App>,
    Path(name): Path<String>,
    Body(request): Body<PredictRequest>,
) -> Result<Response, ApiError> {
    blocking(move || {
        let snap = app.store.get(&name)?;
        let allocation = match &request.allocation {
            Some(a) => allocation_from(a, PredictRequest::ANCHOR)?,
            None => snap.scenario.allocation(),
        };
        let result =
            ops::predict(&snap.scenario, &allocation).map_err(|e| ApiError::op(e, PredictRequest::ANCHOR))?;
        json(&Versioned {
            version: snap.version,
            result,
        })
    })
    .await
}

async fn simulate(
    State(app): State<App>,
    Path(name): Path<String>,
    Body(request): Body<SimulateRequest>,
) -> Result<Response, ApiError> {
    blocking(move || {
        let anchor = SimulateRequest::ANCHOR;
        let snap = app.store.get(&name)?;
        let duration = request.duration_s.unwrap_or(snap.scenario.simulation.duration_s);
        if !(duration > 0.0 && duration <= MAX_SIMULATION_S) {
            return Err(ApiError::op(
                OpError::Invalid(format!("duration_s must lie in (0, {MAX_SIMULATION_S}], got {duration}")),
                anchor,
            ));
        }
        let allocation = match &request.allocation {
            Some(a) => allocation_from(a, anchor)?,
            None => snap.scenario.allocation(),
        };
        let result = ops::simulate(&snap.scenario, &allocation, request.seed, duration)
            .map_err(|e| ApiError::op(e, anchor))?;
        json(&Versioned {
            version: snap.version,
            result,
        })
    })
    .await
}

async fn loss_table(
    State(app): State<App>,
    Path(name): Path<String>,
    query: Result<Query<LossQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(query) = query.map_err(|r| {
        ApiError::new(StatusCode::BAD_REQUEST, "malformed-query", r.body_text()).with_schema("loss-table-query")
    })?;
    blocking(move || {
        let snap = app.store.get(&name)?;
        let (from, to) = (query.from.unwrap_or(2), query.to.unwrap_or(16));
        if from > to {
            return Err(ApiError::op(
                OpError::Invalid(format!("empty user range {from}..{to}")),
                "loss-table-query",
            ));
        }
        let result = ops::compare_loss(&snap.scenario, from..=to).map_err(|e| ApiError::op(e, "loss-table-query"))?;
        json(&Versioned {
            version: snap.version,
            result,
        })
    })
    .await
}

async fn fidelity_scan(
    State(app): State<App>,
    Path(name): Path<String>,
    Body(body): Body<ScanBody>,
) -> Result<Response, ApiError> {
    blocking(move || {
        let snap = app.store.get(&name)?;
        let request = ScanRequest {
            channels: body.channels,
            sampler: body.sampler,
        };
        let result = ops::fidelity_scan(&snap.scenario, &request, body.seed)
            .map_err(|e| ApiError::op(e, ScanBody::ANCHOR))?;
        json(&Versioned {
            version: snap.version,
            result,
        })
    })
    .await
}

/// Serves `router` until the process is stopped.
pub async fn serve(store: Arc<SessionStore>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store)).await
}
