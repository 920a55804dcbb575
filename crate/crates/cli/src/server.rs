//! HTTP service over the engine.
//!
//! Writers on one session are serialized through a per-session queue; reads
//! see the last published snapshot and never wait for a writer. Provider
//! work runs on the blocking pool. Generation, regeneration and enrichment
//! answer `202` with a [`Job`] to poll at `/jobs/{id}`. Edits and manual
//! adds publish the updated text at once and release the queue while the
//! block is enriched, so a later edit supersedes an earlier enrichment.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use jokeasy_core::canvas::{self, add_block_manual_deferred, edit_block_deferred};
use jokeasy_core::pipeline::{apply_enrichment, ops, run_enrichment};
use jokeasy_core::{
    export_final, ApplyOutcome, BlockId, Engine, EngineConfig, EnrichmentTicket, Error, MapId, MapMode, Session,
    SessionId, Store,
};
use serde::de::DeserializeOwned;
use tokio::net::TcpListener;

use crate::wire::{
    AddMapBody, CreateSession, ErrorBody, ErrorEnvelope, FinalizeBody, Job, JobKind, JobStatus, SessionListing,
    TextBody, TransitionBody,
};

#[derive(Debug, thiserror::Error)]
#[error("BindFailure: cannot listen on {addr}: {reason}")]
pub struct BindFailure {
    pub addr: String,
    pub reason: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.to_owned(),
                message: message.into(),
            },
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

pub fn status_for(e: &Error) -> StatusCode {
    use Error::*;
    match e {
        UnknownSession(_) | UnknownMap(_) | UnknownBlock(_) => StatusCode::NOT_FOUND,
        EmptyTopic | InvalidConfig { .. } | EmptyBlockText => StatusCode::UNPROCESSABLE_ENTITY,
        IllegalTransition { .. } | GuardUnsatisfied(_) | WrongStage { .. } | SummaryAlreadyConfirmed | NoSummary
        | EmptyPool(_) | BlocksPending(_) | NotStale(_) | ThemeMissing(_) | MapFinalized(_) | DraftStale(_)
        | NoPrototype(_) | NotFinalized => StatusCode::CONFLICT,
        Provider(_) | StructuredOutputFailed { .. } | EmptyEvidence(_) | InitialGenerationFailed(_) => {
            StatusCode::BAD_GATEWAY
        }
        Prompt(_) | InvariantViolation(_) | IoFailure(_) | UnsupportedVersion(_) | CorruptEnvelope(_) => {
            StatusCode::INTERNAL_SERVER_ERROR
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self {
            status: status_for(&e),
            body: ErrorBody::from(&e),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorEnvelope { error: self.body })).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", e.to_string()))
}

struct Slot {
    writer: Arc<tokio::sync::Mutex<()>>,
    current: RwLock<Session>,
}

impl Slot {
    fn snapshot(&self) -> Session {
        self.current.read().expect("session lock").clone()
    }
}

pub struct AppState {
    engine: Arc<Engine>,
    config: EngineConfig,
    store: Option<Store>,
    sessions: Mutex<HashMap<SessionId, Arc<Slot>>>,
    jobs: Mutex<HashMap<String, Job>>,
    job_seq: AtomicU64,
}

impl AppState {
    /// Service state; sessions already in `store` are loaded and adopted.
    pub fn new(engine: Engine, config: EngineConfig, store: Option<Store>) -> jokeasy_core::Result<Arc<Self>> {
        let mut sessions = HashMap::new();
        if let Some(store) = &store {
            for id in store.list()? {
                let s = store.load(&id)?;
                engine.adopt(&s);
                sessions.insert(id, Arc::new(slot(s)));
            }
        }
        Ok(Arc::new(Self {
            engine: Arc::new(engine),
            config,
            store,
            sessions: Mutex::new(sessions),
            jobs: Mutex::new(HashMap::new()),
            job_seq: AtomicU64::new(0),
        }))
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    fn slot(&self, id: &SessionId) -> ApiResult<Arc<Slot>> {
        self.sessions
            .lock()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownSession(id.clone()).into())
    }

    fn persist(&self, s: &Session) -> ApiResult<()> {
        if let Some(store) = &self.store {
            store.save(s)?;
        }
        Ok(())
    }

    fn publish(&self, slot: &Slot, s: Session) -> ApiResult<Session> {
        self.persist(&s)?;
        *slot.current.write().expect("session lock") = s.clone();
        Ok(s)
    }

    fn open_job(&self, session: &SessionId, kind: JobKind, command: Option<u64>) -> Job {
        let job = Job {
            id: format!("job-{}", self.job_seq.fetch_add(1, Ordering::SeqCst) + 1),
            session_id: session.clone(),
            kind,
            status: JobStatus::Running,
            command,
            error: None,
        };
        self.jobs.lock().expect("jobs lock").insert(job.id.clone(), job.clone());
        job
    }

    fn close_job(&self, id: &str, status: JobStatus, command: Option<u64>, error: Option<ErrorBody>) {
        if let Some(job) = self.jobs.lock().expect("jobs lock").get_mut(id) {
            if job.status.is_terminal() {
                return;
            }
            job.status = status;
            job.command = job.command.or(command);
            job.error = error;
        }
    }
}

fn slot(s: Session) -> Slot {
    Slot {
        writer: Arc::new(tokio::sync::Mutex::new(())),
        current: RwLock::new(s),
    }
}

fn last_command(s: &Session) -> Option<u64> {
    s.event_log.iter().rev().find(|e| e.is_command()).map(|e| e.seq)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker panicked: {e}")))
}

type Op = Box<dyn FnOnce(&Engine, &Session) -> jokeasy_core::Result<Session> + Send>;

/// Runs `op` in the session's queue and answers with the new snapshot.
async fn write(state: Arc<AppState>, id: SessionId, op: Op) -> ApiResult<Json<Session>> {
    let slot = state.slot(&id)?;
    let _turn = slot.writer.clone().lock_owned().await;
    let current = slot.snapshot();
    let engine = state.engine.clone();
    let next = blocking(move || op(&engine, &current)).await??;
    Ok(Json(state.publish(&slot, next)?))
}

/// Takes a place in the session's queue, then runs `op` as a job.
async fn write_job(state: Arc<AppState>, id: SessionId, kind: JobKind, op: Op) -> ApiResult<(StatusCode, Json<Job>)> {
    let slot = state.slot(&id)?;
    let turn = slot.writer.clone().lock_owned().await;
    let job = state.open_job(&id, kind, None);
    let job_id = job.id.clone();
    tokio::spawn(async move {
        let _turn = turn;
        let current = slot.snapshot();
        let engine = state.engine.clone();
        let outcome = match blocking(move || op(&engine, &current)).await {
            Ok(r) => r.map_err(ApiError::from),
            Err(e) => Err(e),
        };
        let outcome = outcome.and_then(|next| state.publish(&slot, next));
        match outcome {
            Ok(next) => state.close_job(&job_id, JobStatus::Done, last_command(&next), None),
            Err(e) => state.close_job(&job_id, JobStatus::Failed, None, Some(e.body)),
        }
    });
    Ok((StatusCode::ACCEPTED, Json(job)))
}

type Plan = Box<dyn FnOnce(&Engine, &Session) -> jokeasy_core::Result<(Session, EnrichmentTicket)> + Send>;

/// Publishes the planned change, then enriches outside the queue and
/// applies the result in a later turn.
async fn enrichment_job(state: Arc<AppState>, id: SessionId, plan: Plan) -> ApiResult<(StatusCode, Json<Job>)> {
    let slot = state.slot(&id)?;
    let job;
    let ticket;
    {
        let _turn = slot.writer.clone().lock_owned().await;
        let (next, t) = plan(&state.engine, &slot.snapshot())?;
        state.publish(&slot, next)?;
        job = state.open_job(&id, JobKind::Enrichment, Some(t.command));
        ticket = t;
    }
    let job_id = job.id.clone();
    tokio::spawn(async move {
        let engine = state.engine.clone();
        let result = match blocking(move || run_enrichment(&engine, ticket)).await {
            Ok(r) => r,
            Err(e) => return state.close_job(&job_id, JobStatus::Failed, None, Some(e.body)),
        };
        let _turn = slot.writer.clone().lock_owned().await;
        let (next, outcome) = apply_enrichment(&state.engine, &slot.snapshot(), result);
        if let Err(e) = state.publish(&slot, next) {
            return state.close_job(&job_id, JobStatus::Failed, None, Some(e.body));
        }
        match outcome {
            ApplyOutcome::Applied { .. } => state.close_job(&job_id, JobStatus::Done, None, None),
            ApplyOutcome::Superseded => state.close_job(&job_id, JobStatus::Superseded, None, None),
            ApplyOutcome::Failed(e) => state.close_job(&job_id, JobStatus::Failed, None, Some(ErrorBody::from(&e))),
        }
    });
    Ok((StatusCode::ACCEPTED, Json(job)))
}

type AppRef = State<Arc<AppState>>;

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn create_session(State(st): AppRef, body: Bytes) -> ApiResult<(StatusCode, Json<Session>)> {
    let req: CreateSession = parse(&body)?;
    let config = req.config.unwrap_or_else(|| st.config.clone());
    let s = st.engine.create_session(req.brief, config)?;
    st.persist(&s)?;
    st.sessions
        .lock()
        .expect("sessions lock")
        .insert(s.id.clone(), Arc::new(slot(s.clone())));
    Ok((StatusCode::CREATED, Json(s)))
}

async fn list_sessions(State(st): AppRef) -> Json<Vec<SessionListing>> {
    let slots: Vec<_> = st.sessions.lock().expect("sessions lock").values().cloned().collect();
    let mut out: Vec<_> = slots
        .iter()
        .map(|s| {
            let s = s.snapshot();
            SessionListing {
                id: s.id,
                stage: s.stage,
                maps: s.maps.len(),
            }
        })
        .collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Json(out)
}

async fn get_session(State(st): AppRef, Path(id): Path<SessionId>) -> ApiResult<Json<Session>> {
    Ok(Json(st.slot(&id)?.snapshot()))
}

async fn audit(State(st): AppRef, Path(id): Path<SessionId>) -> ApiResult<impl IntoResponse> {
    st.slot(&id)?;
    Ok(Json(st.engine.audit_log(&id)?))
}

async fn export(State(st): AppRef, Path(id): Path<SessionId>) -> ApiResult<impl IntoResponse> {
    let text = export_final(&st.slot(&id)?.snapshot())?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text))
}

async fn summarize(State(st): AppRef, Path(id): Path<SessionId>) -> ApiResult<Json<Session>> {
    write(st, id, Box::new(ops::summarize_topic)).await
}

async fn resummarize(State(st): AppRef, Path(id): Path<SessionId>, body: Bytes) -> ApiResult<Json<Session>> {
    let brief = parse(&body)?;
    write(st, id, Box::new(move |e, s| ops::resummarize(e, s, brief))).await
}

async fn confirm(State(st): AppRef, Path(id): Path<SessionId>) -> ApiResult<Json<Session>> {
    write(st, id, Box::new(ops::confirm_summary)).await
}

async fn transition(State(st): AppRef, Path(id): Path<SessionId>, body: Bytes) -> ApiResult<Json<Session>> {
    let TransitionBody { target } = parse(&body)?;
    write(st, id, Box::new(move |e, s| jokeasy_core::transition(s, target, e.now()))).await
}

async fn generate(State(st): AppRef, Path(id): Path<SessionId>) -> ApiResult<(StatusCode, Json<Job>)> {
    write_job(st, id, JobKind::Generation, Box::new(ops::initial_generation)).await
}

async fn add_map(State(st): AppRef, Path(id): Path<SessionId>, body: Bytes) -> ApiResult<Response> {
    let AddMapBody { mode } = parse(&body)?;
    let op: Op = Box::new(move |e, s| canvas::add_joke_map(e, s, mode));
    Ok(match mode {
        MapMode::Manual => (StatusCode::CREATED, write(st, id, op).await?).into_response(),
        MapMode::AiGenerated => write_job(st, id, JobKind::Generation, op).await?.into_response(),
    })
}

async fn remove_map(State(st): AppRef, Path((id, map)): Path<(SessionId, MapId)>) -> ApiResult<Json<Session>> {
    write(st, id, Box::new(move |e, s| canvas::remove_joke_map(e, s, &map))).await
}

async fn complete_map(State(st): AppRef, Path((id, map)): Path<(SessionId, MapId)>) -> ApiResult<(StatusCode, Json<Job>)> {
    write_job(
        st,
        id,
        JobKind::Generation,
        Box::new(move |e, s| ops::complete_manual_map(e, s, &map)),
    )
    .await
}

async fn regenerate(State(st): AppRef, Path((id, map)): Path<(SessionId, MapId)>) -> ApiResult<(StatusCode, Json<Job>)> {
    write_job(
        st,
        id,
        JobKind::Regeneration,
        Box::new(move |e, s| ops::regenerate_joke(e, s, &map)),
    )
    .await
}

async fn add_block_manual(
    State(st): AppRef,
    Path((id, map)): Path<(SessionId, MapId)>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Job>)> {
    let TextBody { text } = parse(&body)?;
    enrichment_job(st, id, Box::new(move |e, s| add_block_manual_deferred(e, s, &map, &text))).await
}

async fn add_block_ai(State(st): AppRef, Path((id, map)): Path<(SessionId, MapId)>) -> ApiResult<(StatusCode, Json<Job>)> {
    write_job(
        st,
        id,
        JobKind::Enrichment,
        Box::new(move |e, s| canvas::add_block_ai(e, s, &map)),
    )
    .await
}

async fn edit_block(
    State(st): AppRef,
    Path((id, map, block)): Path<(SessionId, MapId, BlockId)>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Job>)> {
    let TextBody { text } = parse(&body)?;
    enrichment_job(st, id, Box::new(move |e, s| edit_block_deferred(e, s, &map, &block, &text))).await
}

async fn delete_block(
    State(st): AppRef,
    Path((id, map, block)): Path<(SessionId, MapId, BlockId)>,
) -> ApiResult<Json<Session>> {
    write(st, id, Box::new(move |e, s| canvas::delete_block(e, s, &map, &block))).await
}

async fn reenrich_block(
    State(st): AppRef,
    Path((id, map, block)): Path<(SessionId, MapId, BlockId)>,
) -> ApiResult<(StatusCode, Json<Job>)> {
    write_job(
        st,
        id,
        JobKind::Enrichment,
        Box::new(move |e, s| ops::reenrich_block(e, s, &map, &block).map(|(s, _)| s)),
    )
    .await
}

async fn echo(
    State(st): AppRef,
    Path((id, map, block)): Path<(SessionId, MapId, BlockId)>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(canvas::inspect_block(&st.slot(&id)?.snapshot(), &map, &block)?))
}

async fn finalize(State(st): AppRef, Path(id): Path<SessionId>, body: Bytes) -> ApiResult<Json<Session>> {
    let FinalizeBody { map } = parse(&body)?;
    write(st, id, Box::new(move |e, s| canvas::finalize_joke(e, s, &map))).await
}

async fn get_job(State(st): AppRef, Path(id): Path<String>) -> ApiResult<Json<Job>> {
    st.jobs
        .lock()
        .expect("jobs lock")
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "UnknownJob", format!("unknown job {id}")))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such route")
}

pub fn router(state: Arc<AppState>) -> Router {
    let block = "/sessions/{id}/maps/{mid}/blocks/{bid}";
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/audit", get(audit))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/summary", post(summarize))
        .route("/sessions/{id}/summary/regenerate", post(resummarize))
        .route("/sessions/{id}/summary/confirm", post(confirm))
        .route("/sessions/{id}/transition", post(transition))
        .route("/sessions/{id}/generate", post(generate))
        .route("/sessions/{id}/maps", post(add_map))
        .route("/sessions/{id}/maps/{mid}", axum::routing::delete(remove_map))
        .route("/sessions/{id}/maps/{mid}/complete", post(complete_map))
        .route("/sessions/{id}/maps/{mid}/regenerate", post(regenerate))
        .route("/sessions/{id}/maps/{mid}/blocks", post(add_block_manual))
        .route("/sessions/{id}/maps/{mid}/blocks/ai", post(add_block_ai))
        .route(block, patch(edit_block).delete(delete_block))
        .route(&format!("{block}/echo"), get(echo))
        .route(&format!("{block}/reenrich"), post(reenrich_block))
        .route("/sessions/{id}/finalize", post(finalize))
        .route("/jobs/{id}", get(get_job))
        .fallback(not_found)
        .with_state(state)
}

pub async fn bind(addr: &str) -> Result<TcpListener, BindFailure> {
    TcpListener::bind(addr).await.map_err(|e| BindFailure {
        addr: addr.to_owned(),
        reason: e.to_string(),
    })
}

pub async fn serve(listener: TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

/// A server on its own runtime thread, for callers that are not async.
pub struct Background {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl Background {
    pub fn start(state: Arc<AppState>, addr: &str) -> Result<Self, BindFailure> {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .map_err(|e| BindFailure {
                addr: addr.to_owned(),
                reason: e.to_string(),
            })?;
        let listener = rt.block_on(bind(addr))?;
        let local = listener.local_addr().map_err(|e| BindFailure {
            addr: addr.to_owned(),
            reason: e.to_string(),
        })?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            rt.block_on(async move {
                let _ = axum::serve(listener, router(state))
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await;
            })
        });
        Ok(Self {
            addr: local,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for Background {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
