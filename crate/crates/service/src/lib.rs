//! HTTP service where a human plays the answer-player against a trained
//! question-player. Sessions live in memory; finished games are appended to
//! a JSONL log in the same format as simulated games.

pub mod error;
pub mod session;

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock, TryLockError};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::Rng;
use serde::{Deserialize, Serialize};

use noncoop::game::{Answer, GameRecord};
use noncoop::harness::Checkpoint;

pub use error::{ApiError, ErrorBody};
pub use session::{GameResult, QuestionView, Role, SceneView, Session, SessionState, SessionView, TurnView};

#[derive(Clone, Debug, Default)]
pub struct ServiceConfig {
    /// Overrides each checkpoint's round cap.
    pub max_rounds: Option<usize>,
    /// Finished games are appended here as they complete.
    pub log_path: Option<PathBuf>,
}

pub struct AppState {
    checkpoints: BTreeMap<String, Arc<Checkpoint>>,
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    finished: Mutex<Vec<GameRecord>>,
}

impl AppState {
    pub fn new(checkpoints: BTreeMap<String, Checkpoint>, config: ServiceConfig) -> Result<Self, ApiError> {
        for (id, ck) in &checkpoints {
            let rounds = config.max_rounds.unwrap_or(ck.max_rounds);
            if rounds == 0 || rounds > ck.player.layout.max_rounds {
                return Err(ApiError::Validation(format!(
                    "checkpoint {id} supports at most {} rounds, {rounds} requested",
                    ck.player.layout.max_rounds
                )));
            }
        }
        Ok(AppState {
            checkpoints: checkpoints.into_iter().map(|(k, v)| (k, Arc::new(v))).collect(),
            config,
            sessions: RwLock::default(),
            finished: Mutex::default(),
        })
    }

    pub fn checkpoint_ids(&self) -> impl Iterator<Item = &str> {
        self.checkpoints.keys().map(String::as_str)
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no session {id}")))
    }

    fn record_finished(&self, record: GameRecord) -> Result<(), ApiError> {
        let mut finished = self.finished.lock().expect("log poisoned");
        if let Some(path) = &self.config.log_path {
            let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
            writeln!(file, "{}", record.to_json_line()?)?;
        }
        finished.push(record);
        Ok(())
    }

    /// Finished games as JSONL, read back from the log file when one is set.
    pub fn logs(&self) -> Result<String, ApiError> {
        let finished = self.finished.lock().expect("log poisoned");
        if let Some(path) = &self.config.log_path {
            return match std::fs::read_to_string(path) {
                Ok(text) => Ok(text),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(String::new()),
                Err(e) => Err(e.into()),
            };
        }
        let mut out = String::new();
        for r in finished.iter() {
            out.push_str(&r.to_json_line()?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Load every `*.json` checkpoint in `dir`, keyed by file stem.
pub fn load_checkpoint_dir(dir: &Path) -> noncoop::Result<BTreeMap<String, Checkpoint>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            out.insert(id, Checkpoint::load(&path)?);
        }
    }
    if out.is_empty() {
        return Err(noncoop::Error::InsufficientData(format!(
            "no checkpoints in {}",
            dir.display()
        )));
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    /// May be omitted when exactly one checkpoint is loaded.
    #[serde(default)]
    pub checkpoint: Option<String>,
    /// Pins the scene and the agent's question sampling.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub role: Role,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostAnswer {
    pub answer: String,
    /// The round being answered; a stale value is rejected as a conflict.
    #[serde(default)]
    pub round: Option<usize>,
    #[serde(default)]
    pub notes: Option<String>,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/answer", post(post_answer))
        .route("/logs", get(list_logs))
        .with_state(state)
}

/// Serve until ctrl-c.
pub async fn serve(addr: &str, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(v)| v).map_err(|e| ApiError::Validation(e.body_text()))
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let req = body(payload)?;
    let (ck_id, ck) = match &req.checkpoint {
        Some(id) => app
            .checkpoints
            .get_key_value(id)
            .ok_or_else(|| ApiError::NotFound(format!("no checkpoint {id}")))?,
        None if app.checkpoints.len() == 1 => app.checkpoints.iter().next().expect("one checkpoint"),
        None => {
            return Err(ApiError::Validation(format!(
                "{} checkpoints loaded, name one",
                app.checkpoints.len()
            )))
        }
    };
    let mut rng = rand::thread_rng();
    let seed = req.seed.unwrap_or_else(|| rng.gen());
    let id = format!("{:032x}", rng.gen::<u128>());
    let rounds = app.config.max_rounds.unwrap_or(ck.max_rounds);
    let session = Session::start(id.clone(), ck_id.clone(), ck.clone(), req.role, seed, rounds, now_ms())?;
    let view = session.view();
    app.sessions
        .write()
        .expect("session table poisoned")
        .insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionView>, ApiError> {
    let session = app.session(&id)?;
    let view = session.lock().expect("session poisoned").view();
    Ok(Json(view))
}

async fn post_answer(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    payload: Result<Json<PostAnswer>, JsonRejection>,
) -> Result<Json<SessionView>, ApiError> {
    let session = app.session(&id)?;
    let req = body(payload)?;
    let answer = match req.answer.as_str() {
        "yes" => Answer::Yes,
        "no" => Answer::No,
        "na" => Answer::Na,
        other => {
            return Err(ApiError::Validation(format!(
                "answer must be \"yes\", \"no\" or \"na\", got {other:?}"
            )))
        }
    };
    // A second request arriving while one is being applied loses.
    let mut guard = match session.try_lock() {
        Ok(g) => g,
        Err(TryLockError::WouldBlock) => {
            return Err(ApiError::Conflict(format!("session {id} is busy with another answer")))
        }
        Err(TryLockError::Poisoned(_)) => panic!("session poisoned"),
    };
    let finished = guard.answer(answer, req.round, req.notes)?;
    let view = guard.view();
    drop(guard);
    if let Some(record) = finished {
        app.record_finished(record)?;
    }
    Ok(Json(view))
}

async fn list_logs(State(app): State<Arc<AppState>>) -> Result<impl IntoResponse, ApiError> {
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], app.logs()?))
}
