//! The `/api/v1` HTTP surface.
//!
//! Writes to one session go through that session's exclusive gate in
//! arrival order (the gate is FIFO-fair); reads share it. Model calls, disk
//! writes and compiles run on the blocking pool.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tokio::sync::RwLock as Gate;
use uispec::client::ModelClient;
use uispec::codegen::{generate_ui, CodegenConfig, CodegenError, Toolchain, ToolchainError};
use uispec::edit::{
    apply_with_repair_opts, interpret_intent, EditInstruction, IntentError, RepairError,
    RepairOptions,
};
use uispec::extraction::{extract_spec, ExtractionError, ExtractionOptions, StaticDetector};
use uispec::metrics::{evaluate_fidelity, load_png};
use uispec::retrieval::{ExemplarStore, DEFAULT_K};
use uispec::spec::{parse_spec, resolve_path, spec_diff, SpecPath};
use uispec::validate::validate;

use crate::compose::{compose, ComposeError, ComposeRequest};
use crate::sessions::{PersistError, ProducedBy, Session, SessionRoot};

const BODY_LIMIT: usize = 64 * 1024 * 1024;

pub type Clock = Arc<dyn Fn() -> String + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true))
}

pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub client: Arc<dyn ModelClient>,
    pub toolchain: Arc<dyn Toolchain>,
    pub store: Option<Arc<ExemplarStore>>,
    pub codegen: CodegenConfig,
    pub k: usize,
    pub clock: Clock,
}

impl ServiceConfig {
    pub fn new(
        data_dir: impl Into<PathBuf>,
        client: Arc<dyn ModelClient>,
        toolchain: Arc<dyn Toolchain>,
    ) -> Self {
        Self {
            data_dir: data_dir.into(),
            client,
            toolchain,
            store: None,
            codegen: CodegenConfig::default(),
            k: DEFAULT_K,
            clock: system_clock(),
        }
    }
}

type Handle = Arc<Gate<Session>>;

struct Inner {
    config: ServiceConfig,
    root: SessionRoot,
    sessions: RwLock<BTreeMap<String, Handle>>,
    next_session: Mutex<u64>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Loads every persisted session under the data directory.
    pub fn open(config: ServiceConfig) -> Result<Self, PersistError> {
        let root = SessionRoot::new(&config.data_dir)?;
        let (loaded, next) = root.load_all()?;
        let sessions = loaded
            .into_iter()
            .map(|s| (s.id().to_string(), Arc::new(Gate::new(s))))
            .collect();
        Ok(Self(Arc::new(Inner {
            config,
            root,
            sessions: RwLock::new(sessions),
            next_session: Mutex::new(next),
        })))
    }

    fn session(&self, id: &str) -> Result<Handle, ApiError> {
        self.0
            .sessions
            .read()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown session {id}")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({"error": code, "message": message.into()}),
        }
    }

    fn with(mut self, key: &str, value: impl serde::Serialize) -> Self {
        self.body[key] = serde_json::to_value(value).expect("error details serialize");
        self
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    fn upstream(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_GATEWAY, "model_client_failed", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<PersistError> for ApiError {
    fn from(e: PersistError) -> Self {
        ApiError::internal(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn ok(status: StatusCode, body: Value) -> ApiResult {
    Ok((status, Json(body)).into_response())
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> T + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/health", get(|| async { Json(json!({"status": "ok"})) }))
        .route("/validate", post(validate_doc))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/references", post(upload_reference))
        .route("/sessions/{id}/references/{ref_id}", get(get_reference))
        .route("/sessions/{id}/compose", post(compose_version))
        .route("/sessions/{id}/edit", post(edit_version))
        .route("/sessions/{id}/generate", post(generate))
        .route("/sessions/{id}/versions", get(list_versions))
        .route("/sessions/{id}/versions/{version_id}", get(get_version))
        .route("/sessions/{id}/rollback", post(rollback))
        .route("/sessions/{id}/diff", get(diff))
        .route(
            "/sessions/{id}/artifacts/{version_id}/{*path}",
            get(artifact_file),
        );
    Router::new()
        .nest("/api/v1", api)
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

async fn validate_doc(body: Bytes) -> ApiResult {
    let text =
        std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
    let doc = parse_spec(text).map_err(|e| ApiError::bad_request(e.to_string()))?;
    ok(
        StatusCode::OK,
        serde_json::to_value(validate(&doc)).expect("reports serialize"),
    )
}

async fn create_session(State(state): State<AppState>) -> ApiResult {
    let inner = state.0.clone();
    let session = blocking(move || {
        let mut next = inner.next_session.lock().expect("counter poisoned");
        let session = inner.root.create(*next)?;
        *next += 1;
        Ok::<_, PersistError>(session)
    })
    .await??;
    let id = session.id().to_string();
    state
        .0
        .sessions
        .write()
        .expect("session table poisoned")
        .insert(id.clone(), Arc::new(Gate::new(session)));
    ok(StatusCode::CREATED, json!({"session_id": id}))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let handle = state.session(&id)?;
    let s = handle.read().await;
    let m = s.manifest();
    ok(
        StatusCode::OK,
        json!({
            "session_id": s.id(),
            "head": m.head,
            "references": m.references.iter().map(|r| &r.ref_id).collect::<Vec<_>>(),
            "versions": m.versions.len(),
            "depth": s.depth(),
        }),
    )
}

struct Upload {
    png: Bytes,
    boxes: Option<String>,
    page_goal: String,
}

async fn read_upload(req: Request) -> Result<Upload, ApiError> {
    let is_multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    let mut upload = Upload {
        png: Bytes::new(),
        boxes: None,
        page_goal: String::new(),
    };
    if !is_multipart {
        upload.png = axum::body::to_bytes(req.into_body(), BODY_LIMIT)
            .await
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        return Ok(upload);
    }
    let bad = |e: axum::extract::multipart::MultipartError| ApiError::bad_request(e.to_string());
    let mut form = Multipart::from_request(req, &())
        .await
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    while let Some(field) = form.next_field().await.map_err(bad)? {
        match field.name() {
            Some("image") => upload.png = field.bytes().await.map_err(bad)?,
            Some("boxes") => upload.boxes = Some(field.text().await.map_err(bad)?),
            Some("page_goal") => upload.page_goal = field.text().await.map_err(bad)?,
            _ => {}
        }
    }
    Ok(upload)
}

fn extraction_error(e: ExtractionError) -> ApiError {
    match e {
        ExtractionError::Image(m) => ApiError::bad_request(m),
        other => ApiError::upstream(other.to_string()).with("repair_log", Vec::<Value>::new()),
    }
}

async fn upload_reference(
    State(state): State<AppState>,
    Path(id): Path<String>,
    req: Request,
) -> ApiResult {
    let handle = state.session(&id)?;
    let upload = read_upload(req).await?;
    if upload.png.is_empty() {
        return Err(ApiError::bad_request("no image in upload"));
    }
    let image = image::load_from_memory_with_format(&upload.png, image::ImageFormat::Png)
        .map_err(|e| ApiError::bad_request(format!("not a PNG: {e}")))?
        .to_rgb8();
    let detector = match &upload.boxes {
        Some(text) => StaticDetector::from_sidecar_text(text)
            .map_err(|e| ApiError::bad_request(e.to_string()))?,
        None => StaticDetector::new(Vec::new()),
    };
    let inner = state.0.clone();
    let mut session = handle.write_owned().await;
    blocking(move || {
        let options = ExtractionOptions {
            page_goal: upload.page_goal,
            ..ExtractionOptions::default()
        };
        let out = extract_spec(&image, &detector, inner.config.client.as_ref(), &options)
            .map_err(extraction_error)?;
        let ref_id = session.add_reference(&upload.png, out.spec.clone())?;
        ok(
            StatusCode::CREATED,
            json!({"ref_id": ref_id, "spec": out.spec, "regions": out.regions}),
        )
    })
    .await?
}

async fn get_reference(
    State(state): State<AppState>,
    Path((id, ref_id)): Path<(String, String)>,
) -> ApiResult {
    let handle = state.session(&id)?;
    let s = handle.read().await;
    let spec = s
        .reference(&ref_id)
        .ok_or_else(|| ApiError::not_found(format!("unknown reference {ref_id}")))?;
    ok(StatusCode::OK, json!({"ref_id": ref_id, "spec": spec}))
}

async fn compose_version(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult {
    let handle = state.session(&id)?;
    let request: ComposeRequest = parse_json(&body)?;
    let inner = state.0.clone();
    let mut session = handle.write_owned().await;
    blocking(move || {
        let doc = compose(session.references(), &request).map_err(|e| match e {
            ComposeError::UnknownReference(_) | ComposeError::PathNotFound { .. } => {
                ApiError::not_found(e.to_string())
            }
            ComposeError::Unsupported(_) => ApiError::bad_request(e.to_string()),
            ComposeError::Malformed(_) => ApiError::conflict(e.to_string()),
            ComposeError::Invalid(report) => {
                ApiError::conflict("composed document fails validation")
                    .with("violations", report.violations)
            }
        })?;
        let node =
            session.add_version(doc, ProducedBy::Compose, Vec::new(), (inner.config.clock)())?;
        ok(
            StatusCode::CREATED,
            json!({"version_id": node.id, "spec": node.spec}),
        )
    })
    .await?
}

/// Edit bodies: a list of instructions, `{"edits": [...]}`, or
/// `{"intent": "...", "reference": <fragment> | {"ref_id", "path"}}`.
enum EditBody {
    Edits(Vec<EditInstruction>),
    Intent {
        intent: String,
        reference: Option<Value>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IntentWire {
    intent: String,
    #[serde(default)]
    reference: Option<Value>,
}

fn parse_edit_body(body: &[u8]) -> Result<EditBody, ApiError> {
    let value: Value = parse_json(body)?;
    let edits = |v: Value| {
        serde_json::from_value::<Vec<EditInstruction>>(v)
            .map(EditBody::Edits)
            .map_err(|e| ApiError::bad_request(format!("malformed instruction: {e}")))
    };
    match value {
        Value::Array(_) => edits(value),
        Value::Object(mut map) if map.contains_key("edits") && map.len() == 1 => {
            edits(map.remove("edits").unwrap())
        }
        Value::Object(_) => {
            let wire: IntentWire =
                serde_json::from_value(value).map_err(|e| ApiError::bad_request(e.to_string()))?;
            Ok(EditBody::Intent {
                intent: wire.intent,
                reference: wire.reference,
            })
        }
        _ => Err(ApiError::bad_request(
            "expected a list of instructions or an intent object",
        )),
    }
}

/// A `{"ref_id", "path"}` reference is resolved against the session's
/// extracted documents; anything else is passed through as a fragment.
fn resolve_reference(session: &Session, reference: Value) -> Result<Value, ApiError> {
    let (Some(ref_id), Some(path)) = (
        reference.get("ref_id").and_then(Value::as_str),
        reference.get("path").and_then(Value::as_str),
    ) else {
        return Ok(reference);
    };
    let doc = session
        .reference(ref_id)
        .ok_or_else(|| ApiError::not_found(format!("unknown reference {ref_id}")))?;
    let path: SpecPath = path
        .parse()
        .map_err(|e: uispec::spec::PathError| ApiError::bad_request(e.to_string()))?;
    resolve_path(doc, &path)
        .map(|n| n.value)
        .map_err(|e| ApiError::not_found(e.to_string()))
}

async fn edit_version(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult {
    let handle = state.session(&id)?;
    let body = parse_edit_body(&body)?;
    let inner = state.0.clone();
    let mut session = handle.write_owned().await;
    blocking(move || {
        let client = inner.config.client.as_ref();
        let head = session
            .head()
            .ok_or_else(|| ApiError::conflict("session has no version yet; compose first"))?
            .clone();
        let (edits, produced_by) = match body {
            EditBody::Edits(edits) => (edits, ProducedBy::Edit),
            EditBody::Intent { intent, reference } => {
                let fragment = reference
                    .map(|r| resolve_reference(&session, r))
                    .transpose()?;
                let produced_by = if fragment.is_some() {
                    ProducedBy::ExtractMerge
                } else {
                    ProducedBy::Edit
                };
                let edits = interpret_intent(&intent, fragment.as_ref(), &head.spec, client)
                    .map_err(|e| match e {
                        IntentError::Client(e) => ApiError::upstream(e.to_string()),
                        IntentError::Protocol(e) => ApiError::upstream(e.to_string()),
                    })?;
                (edits, produced_by)
            }
        };
        if edits.is_empty() {
            return Err(ApiError::bad_request("no edit instructions"));
        }
        let options = RepairOptions {
            strict: true,
            ..RepairOptions::default()
        };
        match apply_with_repair_opts(&head.spec, &edits, client, &options) {
            Ok(outcome) => {
                let node = session.add_version(
                    outcome.result,
                    produced_by,
                    outcome.applied,
                    (inner.config.clock)(),
                )?;
                ok(
                    StatusCode::OK,
                    json!({
                        "version_id": node.id,
                        "spec": node.spec,
                        "attempts": outcome.attempts,
                        "repair_calls": outcome.repair_calls,
                        "repair_log": outcome.repair_log,
                    }),
                )
            }
            Err(RepairError::RepairExhausted {
                attempts,
                last,
                repair_log,
            }) => Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "repair_exhausted",
                last.error_message.clone(),
            )
            .with("attempts", attempts)
            .with("repair_log", repair_log)),
            Err(RepairError::Client(e)) => Err(ApiError::upstream(e.to_string())),
        }
    })
    .await?
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct GenerateWire {
    #[serde(default)]
    k: Option<usize>,
    /// A PNG render of the generated page, scored against `reference`.
    #[serde(default)]
    render_png_base64: Option<String>,
    #[serde(default)]
    reference: Option<String>,
}

fn codegen_error(e: CodegenError) -> ApiError {
    match e {
        CodegenError::Toolchain(ToolchainError::Unavailable(m)) => {
            ApiError::new(StatusCode::FAILED_DEPENDENCY, "toolchain_unavailable", m)
        }
        CodegenError::InvalidSpec(report) => {
            ApiError::conflict("head does not validate").with("violations", report.violations)
        }
        CodegenError::Toolchain(e) => ApiError::internal(e.to_string()),
        CodegenError::Store(e) => ApiError::internal(e.to_string()),
        other => ApiError::upstream(other.to_string()),
    }
}

async fn generate(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let handle = state.session(&id)?;
    let wire: GenerateWire = if body.iter().all(u8::is_ascii_whitespace) {
        GenerateWire::default()
    } else {
        parse_json(&body)?
    };
    let render = wire
        .render_png_base64
        .as_deref()
        .map(|b| {
            let png = base64::engine::general_purpose::STANDARD
                .decode(b)
                .map_err(|e| ApiError::bad_request(format!("render is not base64: {e}")))?;
            image::load_from_memory_with_format(&png, image::ImageFormat::Png)
                .map(|i| i.to_rgb8())
                .map_err(|e| ApiError::bad_request(format!("render is not a PNG: {e}")))
        })
        .transpose()?;
    let inner = state.0.clone();
    let mut session = handle.write_owned().await;
    blocking(move || {
        let c = &inner.config;
        let head = session.head().ok_or_else(|| ApiError::conflict("session has no version yet; compose first"))?.clone();
        let reference = match (&render, &wire.reference) {
            (Some(_), Some(r)) => Some(
                session
                    .reference_image(r)
                    .ok_or_else(|| ApiError::not_found(format!("unknown reference {r}")))?,
            ),
            (Some(_), None) => return Err(ApiError::bad_request("a render needs a reference to score against")),
            _ => None,
        };
        let outcome = generate_ui(
            &head.spec,
            c.store.as_deref(),
            wire.k.unwrap_or(c.k),
            c.client.as_ref(),
            c.toolchain.as_ref(),
            &c.codegen,
        )
        .map_err(codegen_error)?;
        let files = &outcome.artifact.files;
        let entry = session.add_artifact(&head.id, files, outcome.compile.ok)?;
        let manifest: Vec<Value> = files
            .iter()
            .map(|(path, text)| {
                json!({"path": path, "bytes": text.len(), "sha256": hex::encode(Sha256::digest(text.as_bytes()))})
            })
            .collect();
        let metrics = match (render, reference) {
            (Some(render), Some(path)) => {
                let reference = load_png(&path).map_err(|e| ApiError::internal(e.to_string()))?;
                Some(evaluate_fidelity(&render, &reference, None).map_err(|e| ApiError::bad_request(e.to_string()))?)
            }
            _ => None,
        };
        ok(
            StatusCode::OK,
            json!({
                "version_id": head.id,
                "artifact": {"dir": entry.dir, "files": manifest, "spec_hash": outcome.artifact.spec_hash},
                "compile_ok": outcome.compile.ok,
                "diagnostics": outcome.compile.diagnostics,
                "revisions": outcome.revisions,
                "hits": outcome.hits,
                "metrics": metrics,
            }),
        )
    })
    .await?
}

async fn list_versions(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let handle = state.session(&id)?;
    let s = handle.read().await;
    let versions: Vec<Value> = s
        .versions()
        .map(|v| {
            json!({
                "id": v.id,
                "parent": v.parent,
                "produced_by": v.produced_by,
                "edits": v.edits,
                "created_at": v.created_at,
            })
        })
        .collect();
    ok(
        StatusCode::OK,
        json!({"head": s.manifest().head, "versions": versions}),
    )
}

async fn get_version(
    State(state): State<AppState>,
    Path((id, version_id)): Path<(String, String)>,
) -> ApiResult {
    let handle = state.session(&id)?;
    let s = handle.read().await;
    let node = s
        .version(&version_id)
        .ok_or_else(|| ApiError::not_found(format!("unknown version {version_id}")))?;
    ok(
        StatusCode::OK,
        serde_json::to_value(node).expect("versions serialize"),
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RollbackWire {
    version_id: String,
}

async fn rollback(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let handle = state.session(&id)?;
    let wire: RollbackWire = parse_json(&body)?;
    let mut session = handle.write_owned().await;
    blocking(move || {
        if !session.rollback(&wire.version_id)? {
            return Err(ApiError::not_found(format!(
                "unknown version {}",
                wire.version_id
            )));
        }
        ok(StatusCode::OK, json!({"head": wire.version_id}))
    })
    .await?
}

#[derive(Deserialize)]
struct DiffQuery {
    from: String,
    to: String,
}

async fn diff(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<DiffQuery>,
) -> ApiResult {
    let handle = state.session(&id)?;
    let s = handle.read().await;
    let find = |v: &str| {
        s.version(v)
            .ok_or_else(|| ApiError::not_found(format!("unknown version {v}")))
    };
    let (from, to) = (find(&q.from)?, find(&q.to)?);
    ok(
        StatusCode::OK,
        serde_json::to_value(spec_diff(&from.spec, &to.spec)).expect("edits serialize"),
    )
}

async fn artifact_file(
    State(state): State<AppState>,
    Path((id, version_id, path)): Path<(String, String, String)>,
) -> ApiResult {
    let handle = state.session(&id)?;
    let s = handle.read().await;
    let entry = s
        .artifact(&version_id)
        .ok_or_else(|| ApiError::not_found(format!("no artifact for {version_id}")))?;
    if !entry.files.contains(&path) {
        return Err(ApiError::not_found(format!("no file {path}")));
    }
    let full = s.dir().join(&entry.dir).join(&path);
    let text = std::fs::read_to_string(full).map_err(|e| ApiError::internal(e.to_string()))?;
    let mime = match path.rsplit('.').next() {
        Some("html") => "text/html; charset=utf-8",
        Some("css") => "text/css; charset=utf-8",
        Some("js" | "jsx" | "ts" | "tsx") => "text/javascript; charset=utf-8",
        _ => "text/plain; charset=utf-8",
    };
    Ok(([(header::CONTENT_TYPE, mime)], text).into_response())
}
