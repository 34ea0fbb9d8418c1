//! HTTP editing service over one loaded model.
//!
//! Sessions live in memory, keyed by sequential ids, with least-recently-used
//! eviction. Edits on one session are exclusive: a second mutation arriving
//! while one runs gets `409`.

mod config;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, Request, State};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use config::{FeatureExtractorChoice, ServiceConfig, MODEL_ENV};

use crate::edit::{EditConfig, EditOp, EditSession, SessionDocument};
use crate::error::Error;
use crate::io::{decode_displacement_png, displacement_scale, encode_displacement_png, encode_line_png, preview_png};
use crate::model::{DetailModel, AGE_CENTER, FORMAT_VERSION};
use crate::structure::LineEdit;
use crate::synth::Corpus;

/// Most sessions kept at once.
pub const SESSION_CAPACITY: usize = 128;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub d: usize,
    pub resolution: usize,
    pub n_e: usize,
    pub n_age: usize,
    pub version: u32,
}

/// Body of `POST /session`: either an uploaded displacement PNG with the
/// scale it was written with, or the id of a corpus sample.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default)]
    pub displacement_png: Option<String>,
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub corpus_id: Option<String>,
    /// Age annotation of an uploaded map; defaults to the middle of the range.
    #[serde(default)]
    pub age: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub extracted_lines_png: String,
    pub preview_png: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpressionBody {
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgeBody {
    pub age: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditResponse {
    pub preview_png: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lines_png: Option<String>,
    pub history_len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UndoResponse {
    pub undone: bool,
    pub preview_png: String,
    pub lines_png: String,
    pub history_len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportResponse {
    /// 16-bit PNG of the current displacement map.
    pub displacement_png: String,
    /// Magnitude mapped to full scale in `displacement_png`.
    pub scale: f64,
    pub resolution: usize,
    pub expression: Vec<f64>,
    pub age: f64,
    pub history: Vec<EditOp>,
    pub session: SessionDocument,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    fn unprocessable(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::OutOfRange { what: "age", .. } => "age_out_of_range",
            Error::OutOfRange { .. } => "out_of_range",
            Error::Shape { .. } => "resolution_mismatch",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidEdit(_) => "invalid_edit",
            Error::InvalidInput(_) => "invalid_input",
            Error::Image(_) => "invalid_png",
            _ => return ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
        };
        ApiError::unprocessable(code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.code.into(), message: self.message })).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

struct Entry {
    session: Arc<RwLock<EditSession>>,
    last_used: u64,
}

#[derive(Default)]
struct Sessions {
    next_id: u64,
    clock: u64,
    entries: HashMap<String, Entry>,
}

impl Sessions {
    fn insert(&mut self, session: EditSession) -> String {
        if self.entries.len() >= SESSION_CAPACITY {
            if let Some(oldest) = self.entries.iter().min_by_key(|(_, e)| e.last_used).map(|(k, _)| k.clone()) {
                self.entries.remove(&oldest);
            }
        }
        self.next_id += 1;
        self.clock += 1;
        let id = self.next_id.to_string();
        self.entries.insert(id.clone(), Entry { session: Arc::new(RwLock::new(session)), last_used: self.clock });
        id
    }

    fn get(&mut self, id: &str) -> Option<Arc<RwLock<EditSession>>> {
        self.clock += 1;
        let clock = self.clock;
        self.entries.get_mut(id).map(|e| {
            e.last_used = clock;
            e.session.clone()
        })
    }
}

/// Shared state of a running service.
#[derive(Clone)]
pub struct AppState {
    model: Arc<DetailModel>,
    corpus: Option<Arc<Corpus>>,
    edit: EditConfig,
    sessions: Arc<Mutex<Sessions>>,
}

impl AppState {
    pub fn new(model: Arc<DetailModel>, corpus: Option<Arc<Corpus>>, edit: EditConfig) -> Self {
        AppState { model, corpus, edit, sessions: Arc::new(Mutex::new(Sessions::default())) }
    }

    fn session(&self, id: &str) -> Result<Arc<RwLock<EditSession>>, ApiError> {
        self.sessions
            .lock()
            .expect("session table poisoned")
            .get(id)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id:?}")))
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session table poisoned").entries.len()
    }
}

/// Routes of the editing API.
pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/model/info", get(model_info))
        .route("/session", post(create_session))
        .route("/session/{id}/edit/lines", post(edit_lines))
        .route("/session/{id}/edit/expression", post(edit_expression))
        .route("/session/{id}/edit/age", post(edit_age))
        .route("/session/{id}/undo", post(undo))
        .route("/session/{id}/export", get(export))
        .layer(middleware::from_fn(log_request))
        .with_state(state)
}

/// Loads the model (and corpus, if configured) and serves until the task is
/// cancelled.
pub async fn serve(config: &ServiceConfig) -> crate::Result<()> {
    let model = Arc::new(config.load_model()?);
    let corpus = config.corpus.as_ref().map(Corpus::load).transpose()?.map(Arc::new);
    let listener = tokio::net::TcpListener::bind(config.listen).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(model, corpus, config.edit))).await?;
    Ok(())
}

async fn log_request(req: Request, next: Next) -> Response {
    let (method, path) = (req.method().clone(), req.uri().path().to_owned());
    let start = Instant::now();
    let resp = next.run(req).await;
    log::info!("method={method} path={path} status={} millis={}", resp.status().as_u16(), start.elapsed().as_millis());
    resp
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::unprocessable("malformed_body", e.to_string()))
}

fn b64(bytes: Vec<u8>) -> String {
    B64.encode(bytes)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

/// Runs `f` with exclusive access to a session, or fails with 409 when
/// another request holds it.
async fn mutate<T: Send + 'static>(
    state: &AppState,
    id: &str,
    f: impl FnOnce(&mut EditSession) -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    let session = state.session(id)?;
    blocking(move || {
        let mut guard = session
            .try_write()
            .map_err(|_| ApiError::new(StatusCode::CONFLICT, "session_busy", "another edit of this session is in progress"))?;
        f(&mut guard)
    })
    .await
}

async fn model_info(State(state): State<AppState>) -> Json<ModelInfo> {
    let m = &state.model;
    Json(ModelInfo { d: m.latent_dim(), resolution: m.resolution(), n_e: m.n_e(), n_age: m.n_age(), version: FORMAT_VERSION })
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> ApiResult<SessionCreated> {
    let req: CreateSession = parse(&body)?;
    let model = state.model.clone();
    let corpus = state.corpus.clone();
    let edit = state.edit;
    let session = blocking(move || session_from_request(model, corpus.as_deref(), edit, &req)).await?;
    let lines = b64(encode_line_png(session.lines())?);
    let preview = b64(preview_png(&session.current_sample()?.disp)?);
    let id = state.sessions.lock().expect("session table poisoned").insert(session);
    Ok(Json(SessionCreated { session_id: id, extracted_lines_png: lines, preview_png: preview }))
}

fn session_from_request(model: Arc<DetailModel>, corpus: Option<&Corpus>, edit: EditConfig, req: &CreateSession) -> Result<EditSession, ApiError> {
    match (&req.displacement_png, &req.corpus_id) {
        (Some(png), None) => {
            let scale = req.scale.ok_or_else(|| ApiError::unprocessable("malformed_body", "displacement_png needs a scale"))?;
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(ApiError::unprocessable("malformed_body", format!("scale must be positive, got {scale}")));
            }
            let bytes = B64.decode(png).map_err(|e| ApiError::unprocessable("malformed_body", format!("displacement_png: {e}")))?;
            let disp = decode_displacement_png(&bytes, scale)?;
            let age = req.age.unwrap_or(AGE_CENTER);
            DetailModel::check_age(age)?;
            Ok(EditSession::from_displacement(model, disp, age)?.with_edit_config(edit)?)
        }
        (None, Some(id)) => {
            if req.scale.is_some() || req.age.is_some() {
                return Err(ApiError::unprocessable("malformed_body", "scale and age apply to uploaded maps only"));
            }
            let corpus = corpus.ok_or_else(|| ApiError::unprocessable("no_corpus", "the service was started without a corpus"))?;
            let sample = corpus.get(id).ok_or_else(|| ApiError::unprocessable("unknown_corpus_sample", format!("no corpus sample {id:?}")))?;
            Ok(EditSession::with_config(model, sample.sample.clone(), edit)?)
        }
        _ => Err(ApiError::unprocessable("malformed_body", "give exactly one of displacement_png and corpus_id")),
    }
}

async fn edit_lines(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<EditResponse> {
    let edit: LineEdit = parse(&body)?;
    let resp = mutate(&state, &id, move |s| {
        let steps = s.config().refine_steps;
        let out = s.edit_lines(&edit, steps)?;
        Ok(EditResponse {
            preview_png: b64(preview_png(&out.sample.disp)?),
            lines_png: Some(b64(encode_line_png(s.lines())?)),
            history_len: s.history().len(),
        })
    })
    .await?;
    Ok(Json(resp))
}

async fn edit_expression(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<EditResponse> {
    let req: ExpressionBody = parse(&body)?;
    let resp = mutate(&state, &id, move |s| {
        let out = s.edit_expression(&req.weights)?;
        Ok(EditResponse { preview_png: b64(preview_png(&out.sample.disp)?), lines_png: None, history_len: s.history().len() })
    })
    .await?;
    Ok(Json(resp))
}

async fn edit_age(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<EditResponse> {
    let req: AgeBody = parse(&body)?;
    let resp = mutate(&state, &id, move |s| {
        let out = s.edit_age(req.age)?;
        Ok(EditResponse { preview_png: b64(preview_png(&out.sample.disp)?), lines_png: None, history_len: s.history().len() })
    })
    .await?;
    Ok(Json(resp))
}

async fn undo(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<UndoResponse> {
    let resp = mutate(&state, &id, move |s| {
        let undone = s.undo();
        Ok(UndoResponse {
            undone,
            preview_png: b64(preview_png(&s.current_sample()?.disp)?),
            lines_png: b64(encode_line_png(s.lines())?),
            history_len: s.history().len(),
        })
    })
    .await?;
    Ok(Json(resp))
}

async fn export(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<ExportResponse> {
    let session = state.session(&id)?;
    let resp = blocking(move || {
        let s = session.read().expect("session lock poisoned");
        let sample = s.current_sample()?;
        let scale = displacement_scale(&sample.disp);
        Ok(ExportResponse {
            displacement_png: b64(encode_displacement_png(&sample.disp, scale)?),
            scale,
            resolution: sample.resolution(),
            expression: sample.expression.clone(),
            age: sample.age,
            history: s.history().to_vec(),
            session: s.export(),
        })
    })
    .await?;
    Ok(Json(resp))
}
