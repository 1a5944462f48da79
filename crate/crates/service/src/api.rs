//! JSON-over-HTTP routes.
//!
//! | route | purpose |
//! |---|---|
//! | `POST /transactions` | store and score one raw transaction (200 pass, 201 alert, 403 stop) |
//! | `GET /transactions/{id}` | stored transaction with its verdict and alert |
//! | `GET /customers/{pan}/window` | a customer's window with verdicts, optional `as_of` |
//! | `GET /alerts?status=open` | alerts, optionally filtered by status |
//! | `GET /alerts/{id}` | one alert |
//! | `POST /alerts/{id}/decision` | `{"decision": "allowed"\|"blocked", "inspector": ".."}` |
//! | `GET /alerts/stream` | server-sent events named `alert`, one per new or decided alert |
//! | `POST /batch/historical` | `{"pan": ".."}` or `{"all": true}`; returns a job id |
//! | `GET /jobs/{id}` | job progress and summary |
//! | `POST /benchmark` | runs a benchmark descriptor (empty body for the default) |
//! | `GET /healthz` | liveness, no auth |
//!
//! Errors carry `{"code": .., "message": ..}`. With a token configured every
//! route but `/healthz` needs `Authorization: Bearer <token>` or `?token=<token>`.

use std::collections::{BTreeMap, HashMap};
use std::convert::Infallible;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{NaiveDateTime, Utc};
use futures::Stream;
use kda::repository::{AlertRecord, AlertStatus, Decision, Repository, ResultsRow};
use kda::simgen::{run_benchmark, BenchmarkDescriptor};
use kda::{
    filter_eligible, kda_evaluate, preprocess, select_window, Action, KdaConfig, KdaVerdict, RawTransaction,
    Transaction, TxId,
};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use crate::batch::{process_customer, window_ending_at, HistoricalSummary};
use crate::config::ServiceConfig;
use crate::error::{ApiError, CliError};

/// Events buffered per stream client before it is dropped as too slow.
const STREAM_BACKLOG: usize = 256;

type ApiResult<T> = Result<T, ApiError>;

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    repo: Repository,
    config: KdaConfig,
    token: Option<String>,
    pan_locks: parking_lot::Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    id_lock: parking_lot::Mutex<()>,
    alerts: broadcast::Sender<AlertRecord>,
    jobs: parking_lot::Mutex<BTreeMap<u64, JobView>>,
}

impl AppState {
    pub fn new(repo: Repository, config: KdaConfig, token: Option<String>) -> Self {
        let (alerts, _) = broadcast::channel(STREAM_BACKLOG);
        Self {
            inner: Arc::new(Inner {
                repo,
                config,
                token,
                pan_locks: Default::default(),
                id_lock: Default::default(),
                alerts,
                jobs: Default::default(),
            }),
        }
    }

    pub fn repository(&self) -> &Repository {
        &self.inner.repo
    }

    /// Requests for one customer queue on this lock in arrival order.
    fn pan_lock(&self, pan: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.inner.pan_locks.lock().entry(pan.to_owned()).or_default().clone()
    }

    fn publish(&self, alert: &AlertRecord) {
        // no subscribers is fine
        let _ = self.inner.alerts.send(alert.clone());
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/transactions", post(post_transaction))
        .route("/transactions/{id}", get(get_transaction))
        .route("/customers/{pan}/window", get(customer_window))
        .route("/alerts", get(list_alerts))
        .route("/alerts/stream", get(alert_stream))
        .route("/alerts/{id}", get(get_alert))
        .route("/alerts/{id}/decision", post(decide))
        .route("/batch/historical", post(start_batch))
        .route("/jobs/{id}", get(get_job))
        .route("/benchmark", post(benchmark))
        .layer(middleware::from_fn_with_state(state.clone(), authorize));
    Router::new().route("/healthz", get(|| async { "ok" })).merge(api).with_state(state)
}

/// Opens the configured repository and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), CliError> {
    let repo = match &config.storage {
        Some(dir) => Repository::open(dir)?,
        None => Repository::in_memory(),
    };
    let state = AppState::new(repo, config.kda, config.token);
    let listener = tokio::net::TcpListener::bind(config.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn authorize(State(state): State<AppState>, request: Request, next: Next) -> Response {
    let Some(expected) = state.inner.token.as_deref() else {
        return next.run(request).await;
    };
    let bearer = request
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    let query = request.uri().query().and_then(|q| q.split('&').find_map(|kv| kv.strip_prefix("token=")));
    if bearer == Some(expected) || query == Some(expected) {
        next.run(request).await
    } else {
        ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token").into_response()
    }
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))?
}

/// A raw transaction, optionally carrying a client-chosen id.
#[derive(Debug, Deserialize)]
struct TransactionRequest {
    id: Option<TxId>,
    #[serde(flatten)]
    raw: RawTransaction,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub transaction: Transaction,
    pub verdict: KdaVerdict,
    pub alert: Option<AlertRecord>,
}

async fn post_transaction(State(state): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<ScoreResponse>)> {
    let TransactionRequest { id, raw } = parse_json(&body)?;
    raw.validate().map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_transaction", e.to_string()))?;
    if !filter_eligible(&raw) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "ineligible",
            "only settled retail, bill payment and top-up transactions are scored",
        ));
    }
    let lock = state.pan_lock(&raw.pan);
    let _turn = lock.lock().await;
    let st = state.clone();
    let response = blocking(move || score(&st, id, &raw)).await?;
    if let Some(alert) = &response.alert {
        state.publish(alert);
    }
    let status = match response.verdict.action {
        Action::Pass => StatusCode::OK,
        Action::Alert => StatusCode::CREATED,
        Action::Stop => StatusCode::FORBIDDEN,
    };
    Ok((status, Json(response)))
}

fn score(state: &AppState, id: Option<TxId>, raw: &RawTransaction) -> ApiResult<ScoreResponse> {
    let repo = &state.inner.repo;
    let config = &state.inner.config;
    let tx = {
        let _ids = state.inner.id_lock.lock();
        let id = id.unwrap_or_else(|| repo.next_id());
        let tx = preprocess(raw, id)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_transaction", e.to_string()))?;
        repo.append_transaction(tx.clone())?;
        tx
    };
    let as_of = tx.timestamp();
    let window = window_ending_at(repo, &tx, config);
    let verdict = kda_evaluate(&window, config)?;
    repo.store_results(&ResultsRow::from_verdict(&verdict, as_of))?;
    repo.store_verdict(&verdict)?;
    let alert = if verdict.nf { Some(repo.open_alert(&verdict, &tx.pan, Utc::now())?) } else { None };
    Ok(ScoreResponse { transaction: tx, verdict, alert })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TransactionView {
    pub transaction: Transaction,
    pub verdict: Option<KdaVerdict>,
    pub alert: Option<AlertRecord>,
}

async fn get_transaction(State(state): State<AppState>, Path(id): Path<TxId>) -> ApiResult<Json<TransactionView>> {
    let repo = &state.inner.repo;
    let transaction = repo
        .transaction(id)
        .ok_or_else(|| ApiError::not_found("unknown_transaction", format!("no transaction {id}")))?;
    Ok(Json(TransactionView { transaction, verdict: repo.verdict(id), alert: repo.alert_for_transaction(id) }))
}

#[derive(Debug, Deserialize)]
struct WindowQuery {
    as_of: Option<NaiveDateTime>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WindowView {
    pub pan: String,
    pub as_of: NaiveDateTime,
    pub transactions: Vec<TransactionView>,
}

async fn customer_window(
    State(state): State<AppState>,
    Path(pan): Path<String>,
    Query(q): Query<WindowQuery>,
) -> ApiResult<Json<WindowView>> {
    let repo = &state.inner.repo;
    let history = repo.history(&pan);
    let last = history.last().ok_or_else(|| ApiError::not_found("unknown_customer", format!("no customer `{pan}`")))?;
    let as_of = q.as_of.unwrap_or_else(|| last.timestamp());
    let transactions = select_window(&history, as_of, &state.inner.config)
        .into_iter()
        .map(|t| TransactionView {
            verdict: repo.verdict(t.id),
            alert: repo.alert_for_transaction(t.id),
            transaction: t,
        })
        .collect();
    Ok(Json(WindowView { pan, as_of, transactions }))
}

#[derive(Debug, Deserialize)]
struct AlertQuery {
    status: Option<String>,
}

async fn list_alerts(State(state): State<AppState>, Query(q): Query<AlertQuery>) -> ApiResult<Json<Vec<AlertRecord>>> {
    let status = q.status.map(|s| s.parse::<AlertStatus>()).transpose().map_err(ApiError::bad_request)?;
    Ok(Json(state.inner.repo.alerts(status)))
}

async fn get_alert(State(state): State<AppState>, Path(id): Path<u64>) -> ApiResult<Json<AlertRecord>> {
    state.inner.repo.alert(id).map(Json).ok_or_else(|| ApiError::not_found("unknown_alert", format!("no alert {id}")))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub decision: Decision,
    pub inspector: String,
}

async fn decide(State(state): State<AppState>, Path(id): Path<u64>, body: Bytes) -> ApiResult<Json<AlertRecord>> {
    let req: DecisionRequest = parse_json(&body)?;
    if req.inspector.trim().is_empty() {
        return Err(ApiError::bad_request("inspector must not be empty"));
    }
    let record = state.inner.repo.decide_alert(id, req.decision, req.inspector.trim(), Utc::now())?;
    state.publish(&record);
    Ok(Json(record))
}

async fn alert_stream(State(state): State<AppState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = state.inner.alerts.subscribe();
    let events = futures::stream::unfold(rx, |mut rx| async move {
        // a lagging client has missed events; end its stream so it reconnects
        let alert = rx.recv().await.ok()?;
        let event = Event::default()
            .event("alert")
            .id(format!("{}:{}", alert.id, serde_json::to_value(alert.status).ok()?.as_str()?))
            .json_data(&alert)
            .ok()?;
        Some((Ok(event), rx))
    });
    Sse::new(events).keep_alive(KeepAlive::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Completed,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobView {
    pub id: u64,
    /// `all` or the customer's pan.
    pub scope: String,
    pub status: JobStatus,
    pub done: usize,
    pub total: usize,
    pub summary: Option<HistoricalSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
struct BatchRequest {
    pan: Option<String>,
    #[serde(default)]
    all: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JobCreated {
    pub job_id: u64,
}

async fn start_batch(State(state): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<JobCreated>)> {
    let req: BatchRequest =
        if body.iter().all(u8::is_ascii_whitespace) { BatchRequest::default() } else { parse_json(&body)? };
    let repo = &state.inner.repo;
    let (scope, pans) = match (req.pan, req.all) {
        (Some(_), true) => return Err(ApiError::bad_request("give either `pan` or `all`, not both")),
        (Some(pan), false) => {
            if repo.history(&pan).is_empty() {
                return Err(ApiError::not_found("unknown_customer", format!("no customer `{pan}`")));
            }
            (pan.clone(), vec![pan])
        }
        (None, _) => {
            let pans = repo.pans();
            if pans.is_empty() {
                return Err(ApiError::not_found("empty_repository", "no transactions stored"));
            }
            ("all".to_owned(), pans)
        }
    };

    let job_id = {
        let mut jobs = state.inner.jobs.lock();
        if jobs.values().any(|j| j.status == JobStatus::Running && j.scope == scope) {
            return Err(ApiError::new(StatusCode::CONFLICT, "job_running", format!("a job for `{scope}` is running")));
        }
        let id = jobs.keys().next_back().map_or(1, |m| m + 1);
        let view =
            JobView { id, scope, status: JobStatus::Running, done: 0, total: pans.len(), summary: None, error: None };
        jobs.insert(id, view);
        id
    };

    let st = state.clone();
    tokio::task::spawn_blocking(move || {
        let mut summary = HistoricalSummary::default();
        let mut failure = None;
        for (i, pan) in pans.iter().enumerate() {
            let lock = st.pan_lock(pan);
            let _turn = lock.blocking_lock();
            match process_customer(&st.inner.repo, pan, &st.inner.config) {
                Ok(verdicts) => summary.add_customer(&verdicts),
                Err(e) => {
                    failure = Some(format!("{pan}: {e}"));
                    break;
                }
            }
            if let Some(job) = st.inner.jobs.lock().get_mut(&job_id) {
                job.done = i + 1;
            }
        }
        if let Some(job) = st.inner.jobs.lock().get_mut(&job_id) {
            match failure {
                None => {
                    job.status = JobStatus::Completed;
                    job.summary = Some(summary.finish());
                }
                Some(e) => {
                    job.status = JobStatus::Failed;
                    job.error = Some(e);
                }
            }
        }
    });
    Ok((StatusCode::ACCEPTED, Json(JobCreated { job_id })))
}

async fn get_job(State(state): State<AppState>, Path(id): Path<u64>) -> ApiResult<Json<JobView>> {
    state
        .inner
        .jobs
        .lock()
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found("unknown_job", format!("no job {id}")))
}

async fn benchmark(body: Bytes) -> ApiResult<Response> {
    let descriptor: BenchmarkDescriptor =
        if body.iter().all(u8::is_ascii_whitespace) { BenchmarkDescriptor::default() } else { parse_json(&body)? };
    let report = blocking(move || run_benchmark(&descriptor).map_err(ApiError::from)).await?;
    Ok(Json(report).into_response())
}
