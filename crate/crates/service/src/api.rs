//! HTTP and server-sent-event interface.
//!
//! Reads come from the pipeline's shared snapshot; mutations go through the
//! pipeline command queue. When a token is configured every mutating route
//! requires `Authorization: Bearer <token>`.

use std::convert::Infallible;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chainrisk_core::alert::{AlertError, AlertState};
use chainrisk_core::sim::Scenario;
use chainrisk_core::telemetry::Timestamp;
use futures::{Stream, StreamExt};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio_stream::wrappers::BroadcastStream;

use crate::pipeline::{ActionRequest, Command, PipelineError, PipelineHandle, RuleUpdate};
use crate::report::{generate_report, ReportError};

#[derive(Clone)]
pub struct ApiState {
    pub pipeline: PipelineHandle,
    pub token: Option<String>,
}

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = match &e {
            PipelineError::Alert(AlertError::UnknownAlert(_)) => StatusCode::NOT_FOUND,
            PipelineError::Alert(AlertError::InvalidTransition { .. }) | PipelineError::NotSimulating => {
                StatusCode::CONFLICT
            }
            PipelineError::Alert(_) | PipelineError::Sim(_) | PipelineError::InvalidRequest(_) => {
                StatusCode::BAD_REQUEST
            }
            PipelineError::Stopped => StatusCode::SERVICE_UNAVAILABLE,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<ReportError> for ApiError {
    fn from(e: ReportError) -> Self {
        let status = match e {
            ReportError::InvalidPeriod { .. } => StatusCode::BAD_REQUEST,
            ReportError::MalformedEntry { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(pipeline: PipelineHandle, token: Option<String>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/kris", get(list_kris))
        .route("/v1/kris/{id}/series", get(kri_series))
        .route("/v1/alerts", get(list_alerts))
        .route("/v1/alerts/{id}/ack", post(ack_alert))
        .route("/v1/actions", post(record_action))
        .route("/v1/rules", get(get_rules).put(put_rules))
        .route("/v1/score", get(get_score))
        .route("/v1/report", get(get_report))
        .route("/v1/scenarios", post(inject_scenario))
        .route("/v1/stream", get(stream))
        .with_state(ApiState { pipeline, token })
}

fn authorize(state: &ApiState, headers: &HeaderMap) -> ApiResult<()> {
    let Some(token) = &state.token else {
        return Ok(());
    };
    let presented = headers
        .get(axum::http::header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    match presented {
        Some(p) if p == token => Ok(()),
        _ => Err(ApiError::new(StatusCode::UNAUTHORIZED, "missing or invalid API token")),
    }
}

async fn health(State(s): State<ApiState>) -> Json<Value> {
    let st = s.pipeline.state.read();
    Json(json!({
        "mode": st.mode,
        "now": st.now,
        "ticks": st.ticks,
        "exhausted": st.exhausted,
        "rules_version": st.rules.version,
    }))
}

async fn list_kris(State(s): State<ApiState>) -> Json<Value> {
    let st = s.pipeline.state.read();
    let kris: Vec<Value> = st
        .definitions
        .iter()
        .map(|d| json!({ "definition": d, "latest": st.latest.get(&d.kri_id) }))
        .collect();
    Json(json!({ "now": st.now, "kris": kris }))
}

#[derive(Deserialize)]
struct Range {
    from: Option<Timestamp>,
    to: Option<Timestamp>,
}

async fn kri_series(
    State(s): State<ApiState>,
    Path(id): Path<String>,
    Query(range): Query<Range>,
) -> ApiResult<Json<Value>> {
    let st = s.pipeline.state.read();
    if !st.definitions.iter().any(|d| d.kri_id == id) {
        return Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown KRI `{id}`")));
    }
    let samples = st.series(&id, range.from, range.to);
    Ok(Json(json!({ "kri_id": id, "samples": samples })))
}

#[derive(Deserialize)]
struct AlertFilter {
    state: Option<AlertState>,
}

async fn list_alerts(State(s): State<ApiState>, Query(f): Query<AlertFilter>) -> Json<Value> {
    let st = s.pipeline.state.read();
    let alerts: Vec<_> = st
        .alerts
        .iter()
        .filter(|a| f.state.is_none_or(|want| a.state == want))
        .collect();
    Json(json!({ "alerts": alerts }))
}

#[derive(Deserialize)]
struct AckBody {
    actor: String,
    #[serde(default)]
    note: String,
}

async fn ack_alert(
    State(s): State<ApiState>,
    headers: HeaderMap,
    Path(id): Path<String>,
    Json(body): Json<AckBody>,
) -> ApiResult<Json<Value>> {
    authorize(&s, &headers)?;
    let alert = s
        .pipeline
        .request(|reply| Command::Acknowledge {
            alert_id: id,
            actor: body.actor,
            note: body.note,
            reply,
        })
        .await?;
    Ok(Json(json!(alert)))
}

async fn record_action(
    State(s): State<ApiState>,
    headers: HeaderMap,
    Json(request): Json<ActionRequest>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    authorize(&s, &headers)?;
    let entry = s
        .pipeline
        .request(|reply| Command::RecordAction { request, reply })
        .await?;
    Ok((StatusCode::CREATED, Json(json!(entry))))
}

async fn get_rules(State(s): State<ApiState>) -> Json<Value> {
    Json(json!(s.pipeline.state.read().rules))
}

#[derive(Deserialize)]
struct RulesBody {
    actor: String,
    #[serde(flatten)]
    update: RuleUpdate,
}

/// The body is decoded by hand so a malformed rule reads as an invalid
/// rule rather than a generic extraction failure.
async fn put_rules(
    State(s): State<ApiState>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> ApiResult<Json<Value>> {
    authorize(&s, &headers)?;
    let body: RulesBody = serde_json::from_value(body).map_err(|e| {
        PipelineError::Alert(AlertError::InvalidRule {
            rule_id: String::new(),
            reason: e.to_string(),
        })
    })?;
    let rules = s
        .pipeline
        .request(|reply| Command::UpdateRules {
            update: body.update,
            actor: body.actor,
            reply,
        })
        .await?;
    Ok(Json(json!(rules)))
}

async fn get_score(State(s): State<ApiState>) -> ApiResult<Json<Value>> {
    match &s.pipeline.state.read().score {
        Some(score) => Ok(Json(json!(score))),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, "no score computed yet")),
    }
}

async fn get_report(State(s): State<ApiState>, Query(range): Query<Range>) -> ApiResult<Json<Value>> {
    let from = range.from.unwrap_or(Timestamp::MIN);
    let to = range.to.unwrap_or(Timestamp::MAX);
    let audit = s.pipeline.audit.read();
    Ok(Json(json!(generate_report(audit.entries(), from, to)?)))
}

#[derive(Deserialize)]
struct ScenarioBody {
    scenario: Scenario,
    actor: String,
}

async fn inject_scenario(
    State(s): State<ApiState>,
    headers: HeaderMap,
    Json(body): Json<ScenarioBody>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    authorize(&s, &headers)?;
    let scenario = s
        .pipeline
        .request(|reply| Command::Inject {
            scenario: body.scenario,
            actor: body.actor,
            reply,
        })
        .await?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "scenario": scenario }))))
}

async fn stream(State(s): State<ApiState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let events = BroadcastStream::new(s.pipeline.subscribe()).filter_map(|msg| async move {
        match msg {
            Ok(ev) => Some(Ok(Event::default()
                .id(ev.seq.to_string())
                .event(ev.event)
                .json_data(ev.data)
                .expect("stream payloads serialize"))),
            Err(e) => {
                tracing::warn!("stream subscriber fell behind: {e}");
                None
            }
        }
    });
    Sse::new(events).keep_alive(KeepAlive::new().interval(Duration::from_secs(15)))
}
