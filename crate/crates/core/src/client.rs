//! Pluggable model clients.
//!
//! A request is a prompt plus optional image bytes; a response is UTF-8 text.
//! [`MockClient`] replays fixture files, [`ScriptedClient`] replays an
//! in-memory list, and [`CountingClient`] wraps any client to record calls.

use std::collections::VecDeque;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// What a request is for. Fixture routing keys on this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    RegionExtraction,
    GlobalProfile,
    EditIntent,
    EditRepair,
    CodeGeneration,
    CodeRevision,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::RegionExtraction => "region-extraction",
            Task::GlobalProfile => "global-profile",
            Task::EditIntent => "edit-intent",
            Task::EditRepair => "edit-repair",
            Task::CodeGeneration => "code-generation",
            Task::CodeRevision => "code-revision",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelRequest {
    pub task: Task,
    pub prompt: String,
    pub image: Option<Vec<u8>>,
}

impl ModelRequest {
    pub fn text(task: Task, prompt: impl Into<String>) -> Self {
        Self {
            task,
            prompt: prompt.into(),
            image: None,
        }
    }

    pub fn with_image(task: Task, prompt: impl Into<String>, image: Vec<u8>) -> Self {
        Self {
            task,
            prompt: prompt.into(),
            image: Some(image),
        }
    }

    /// SHA-256 over the prompt, a NUL separator, and the image bytes.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.prompt.as_bytes());
        hasher.update([0u8]);
        if let Some(image) = &self.image {
            hasher.update(image);
        }
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("no fixture for {task} request {fingerprint}")]
    FixtureMissing { task: Task, fingerprint: String },
    #[error("fixture i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad fixture routes: {0}")]
    Routes(String),
    #[error("scripted client has no response left for call {0}")]
    Exhausted(usize),
    #[error("transport: {0}")]
    Transport(String),
}

pub trait ModelClient: Send + Sync {
    fn complete(&self, request: &ModelRequest) -> Result<String, ClientError>;
}

impl<C: ModelClient + ?Sized> ModelClient for &C {
    fn complete(&self, request: &ModelRequest) -> Result<String, ClientError> {
        (**self).complete(request)
    }
}

impl<C: ModelClient + ?Sized> ModelClient for Box<C> {
    fn complete(&self, request: &ModelRequest) -> Result<String, ClientError> {
        (**self).complete(request)
    }
}

impl<C: ModelClient + ?Sized> ModelClient for std::sync::Arc<C> {
    fn complete(&self, request: &ModelRequest) -> Result<String, ClientError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Route {
    task: Task,
    #[serde(default)]
    contains: Vec<String>,
    response: String,
}

/// Replays fixture files from a directory.
///
/// Lookup order: `<dir>/<fingerprint>.txt` for an exact request match, then
/// the first rule in `<dir>/routes.json` whose task matches and whose
/// `contains` substrings all occur in the prompt.
#[derive(Debug, Clone)]
pub struct MockClient {
    dir: PathBuf,
    routes: Vec<Route>,
}

impl MockClient {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, ClientError> {
        let dir = dir.into();
        let routes_path = dir.join("routes.json");
        let routes = if routes_path.exists() {
            let text = fs::read_to_string(&routes_path)?;
            serde_json::from_str(&text).map_err(|e| ClientError::Routes(e.to_string()))?
        } else {
            Vec::new()
        };
        Ok(Self { dir, routes })
    }

    /// Builds a client from `SPEC_MOCK_DIR`, if set.
    pub fn from_env() -> Option<Result<Self, ClientError>> {
        std::env::var_os("SPEC_MOCK_DIR").map(|dir| Self::new(PathBuf::from(dir)))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl ModelClient for MockClient {
    fn complete(&self, request: &ModelRequest) -> Result<String, ClientError> {
        let fingerprint = request.fingerprint();
        let exact = self.dir.join(format!("{fingerprint}.txt"));
        if exact.exists() {
            return Ok(fs::read_to_string(exact)?);
        }
        let route = self.routes.iter().find(|r| {
            r.task == request.task
                && r.contains
                    .iter()
                    .all(|s| request.prompt.contains(s.as_str()))
        });
        match route {
            Some(route) => Ok(fs::read_to_string(self.dir.join(&route.response))?),
            None => Err(ClientError::FixtureMissing {
                task: request.task,
                fingerprint,
            }),
        }
    }
}

/// Returns canned responses in order; the last one repeats when `repeat_last`
/// is set. Records every request it receives.
#[derive(Debug, Default)]
pub struct ScriptedClient {
    responses: Mutex<VecDeque<String>>,
    repeat_last: Option<String>,
    seen: Mutex<Vec<ModelRequest>>,
}

impl ScriptedClient {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            responses: Mutex::new(responses.into_iter().map(Into::into).collect()),
            repeat_last: None,
            seen: Mutex::new(Vec::new()),
        }
    }

    /// A client that answers every request with `response`.
    pub fn always(response: impl Into<String>) -> Self {
        Self {
            repeat_last: Some(response.into()),
            ..Self::default()
        }
    }

    pub fn calls(&self) -> usize {
        self.seen.lock().unwrap().len()
    }

    pub fn requests(&self) -> Vec<ModelRequest> {
        self.seen.lock().unwrap().clone()
    }
}

impl ModelClient for ScriptedClient {
    fn complete(&self, request: &ModelRequest) -> Result<String, ClientError> {
        let mut seen = self.seen.lock().unwrap();
        seen.push(request.clone());
        let next = self.responses.lock().unwrap().pop_front();
        match next.or_else(|| self.repeat_last.clone()) {
            Some(response) => Ok(response),
            None => Err(ClientError::Exhausted(seen.len())),
        }
    }
}

/// Counts calls per task on top of another client.
#[derive(Debug)]
pub struct CountingClient<C> {
    inner: C,
    total: AtomicUsize,
    by_task: Mutex<Vec<(Task, usize)>>,
}

impl<C> CountingClient<C> {
    pub fn new(inner: C) -> Self {
        Self {
            inner,
            total: AtomicUsize::new(0),
            by_task: Mutex::new(Vec::new()),
        }
    }

    pub fn total(&self) -> usize {
        self.total.load(Ordering::SeqCst)
    }

    pub fn calls_for(&self, task: Task) -> usize {
        self.by_task
            .lock()
            .unwrap()
            .iter()
            .find(|(t, _)| *t == task)
            .map_or(0, |(_, n)| *n)
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }
}

impl<C: ModelClient> ModelClient for CountingClient<C> {
    fn complete(&self, request: &ModelRequest) -> Result<String, ClientError> {
        self.total.fetch_add(1, Ordering::SeqCst);
        {
            let mut by_task = self.by_task.lock().unwrap();
            match by_task.iter_mut().find(|(t, _)| *t == request.task) {
                Some((_, n)) => *n += 1,
                None => by_task.push((request.task, 1)),
            }
        }
        self.inner.complete(request)
    }
}

/// Pulls the JSON payload out of a model answer that may wrap it in prose or
/// a fenced block. Prefers the last fenced block, then the whole text, then
/// the span from the first opening bracket to the last closing one.
pub fn extract_json_payload(text: &str) -> Option<&str> {
    if let Some(block) = last_fenced_block(text) {
        return Some(block.trim());
    }
    let trimmed = text.trim();
    if serde_json::from_str::<serde::de::IgnoredAny>(trimmed).is_ok() {
        return Some(trimmed);
    }
    let start = trimmed.find(['{', '['])?;
    let close = if trimmed.as_bytes()[start] == b'{' {
        '}'
    } else {
        ']'
    };
    let end = trimmed.rfind(close)?;
    (end > start).then(|| &trimmed[start..=end])
}

fn last_fenced_block(text: &str) -> Option<&str> {
    let mut last = None;
    let mut rest = text;
    let mut offset = 0;
    while let Some(open) = rest.find("```") {
        let after_ticks = open + 3;
        let body_start = rest[after_ticks..]
            .find('\n')
            .map(|n| after_ticks + n + 1)?;
        let close = rest[body_start..].find("```")?;
        last = Some(&text[offset + body_start..offset + body_start + close]);
        let consumed = body_start + close + 3;
        offset += consumed;
        rest = &rest[consumed..];
    }
    last
}
