//! HTTP front for one interactive session.
//!
//! `GET /scene` and `GET /metrics` read shared copies and never wait on a
//! running command. `POST /command` runs one command at a time and answers
//! 409 while another is in flight. `GET /events` streams every pipeline
//! event as server-sent events named after the event type.

use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use fuzzyhri_core::orchestrator::{
    aggregate, Clock, CommandInput, CommandReport, Pipeline, PipelineEvent, TrialRecord,
};
use fuzzyhri_core::scene::{Scene, SceneSnapshot};

pub const EVENT_BUFFER: usize = 1024;

/// The session a gateway drives.
pub struct Session {
    pub pipeline: Pipeline,
    pub scene: Scene,
    pub clock: Box<dyn Clock + Send>,
}

struct Shared {
    session: Mutex<Session>,
    busy: AtomicBool,
    snapshot: RwLock<SceneSnapshot>,
    records: RwLock<Vec<TrialRecord>>,
    events: broadcast::Sender<PipelineEvent>,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

/// Held while a command runs; dropping it frees the session.
pub struct BusyGuard(Arc<Shared>);

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.0.busy.store(false, Ordering::Release);
    }
}

impl AppState {
    pub fn new(session: Session) -> Self {
        let snapshot = session.scene.snapshot(&[]);
        let (events, _) = broadcast::channel(EVENT_BUFFER);
        AppState(Arc::new(Shared {
            session: Mutex::new(session),
            busy: AtomicBool::new(false),
            snapshot: RwLock::new(snapshot),
            records: RwLock::new(vec![]),
            events,
        }))
    }

    /// Claim the session, or `None` if a command is already running.
    pub fn try_acquire(&self) -> Option<BusyGuard> {
        self.0
            .busy
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .ok()
            .map(|_| BusyGuard(self.0.clone()))
    }

    pub fn snapshot(&self) -> SceneSnapshot {
        self.0.snapshot.read().expect("snapshot lock").clone()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<PipelineEvent> {
        self.0.events.subscribe()
    }

    /// Seed the metrics with records from an earlier batch.
    pub fn add_records(&self, records: impl IntoIterator<Item = TrialRecord>) {
        self.0
            .records
            .write()
            .expect("records lock")
            .extend(records);
    }

    /// Run a command synchronously. Callers must hold the guard.
    pub fn run(&self, _guard: &BusyGuard, input: CommandInput) -> CommandReport {
        let shared = &self.0;
        let mut session = shared.session.lock().unwrap_or_else(|p| p.into_inner());
        let Session {
            pipeline,
            scene,
            clock,
        } = &mut *session;
        let mut sink = |e: PipelineEvent| {
            if let PipelineEvent::Scene { snapshot } = &e {
                *shared.snapshot.write().expect("snapshot lock") = snapshot.clone();
            }
            // no subscribers is fine
            let _ = shared.events.send(e);
        };
        let report = pipeline.run_command(scene, input, clock.as_mut(), &mut sink);
        let mut records = shared.records.write().expect("records lock");
        let id = format!("cmd-{}", records.len() + 1);
        records.push(report.to_record(id));
        report
    }
}

/// Body of `POST /command`: exactly one of the two fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandBody {
    #[serde(default)]
    pub text: Option<String>,
    /// Action-list text or the canonical JSON array.
    #[serde(default)]
    pub actions: Option<serde_json::Value>,
}

impl CommandBody {
    pub fn into_input(self) -> Result<CommandInput, String> {
        match (self.text, self.actions) {
            (Some(t), None) if !t.trim().is_empty() => Ok(CommandInput::Text(t)),
            (None, Some(serde_json::Value::String(a))) => Ok(CommandInput::Actions(a)),
            (None, Some(v @ serde_json::Value::Array(_))) => {
                Ok(CommandInput::Actions(v.to_string()))
            }
            (None, Some(_)) => Err("`actions` must be a string or an array".into()),
            (Some(_), Some(_)) => Err("give `text` or `actions`, not both".into()),
            _ => Err("empty command".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: msg.into() })).into_response()
}

async fn get_scene(State(s): State<AppState>) -> Json<SceneSnapshot> {
    Json(s.snapshot())
}

async fn get_metrics(State(s): State<AppState>) -> Response {
    let records = s.0.records.read().expect("records lock").clone();
    match aggregate(&records) {
        Ok(r) => Json(r).into_response(),
        Err(e) => error(StatusCode::NOT_FOUND, e.to_string()),
    }
}

async fn post_command(State(s): State<AppState>, body: Json<CommandBody>) -> Response {
    let input = match body.0.into_input() {
        Ok(i) => i,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    let Some(guard) = s.try_acquire() else {
        return error(StatusCode::CONFLICT, "a command is already running");
    };
    let state = s.clone();
    let joined = tokio::task::spawn_blocking(move || state.run(&guard, input)).await;
    match joined {
        Ok(report) => {
            // nothing was parsed: the request itself was bad
            let status = if report.calls.is_empty() && !report.ok {
                StatusCode::UNPROCESSABLE_ENTITY
            } else {
                StatusCode::OK
            };
            (status, Json(report)).into_response()
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

fn event_name(e: &PipelineEvent) -> &'static str {
    match e {
        PipelineEvent::Wake { .. } => "wake",
        PipelineEvent::StageStarted { .. } => "stage_started",
        PipelineEvent::StageFinished { .. } => "stage_finished",
        PipelineEvent::Transcript { .. } => "transcript",
        PipelineEvent::Actions { .. } => "actions",
        PipelineEvent::Detections { .. } => "detections",
        PipelineEvent::Trajectory { .. } => "trajectory",
        PipelineEvent::Scene { .. } => "scene",
        PipelineEvent::TrialFinished { .. } => "trial_finished",
    }
}

pub fn to_sse(e: &PipelineEvent) -> Event {
    let data = serde_json::to_string(e).expect("events serialize");
    Event::default().event(event_name(e)).data(data)
}

/// Current scene first, then live events. Lagging subscribers skip what
/// they missed.
pub fn event_stream(s: &AppState) -> impl Stream<Item = Result<Event, Infallible>> {
    let first = PipelineEvent::Scene {
        snapshot: s.snapshot(),
    };
    let rx = s.subscribe();
    let live = stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(e) => return Some((Ok(to_sse(&e)), rx)),
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    log::warn!("event subscriber lagged by {n}");
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    stream::once(async move { Ok(to_sse(&first)) }).chain(live)
}

async fn get_events(
    State(s): State<AppState>,
) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    Sse::new(event_stream(&s)).keep_alive(KeepAlive::default())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/scene", get(get_scene))
        .route("/metrics", get(get_metrics))
        .route("/command", post(post_command))
        .route("/events", get(get_events))
        .with_state(state)
}

pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("gateway listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
