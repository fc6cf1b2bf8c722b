#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use uispec::client::MockClient;
use uispec::codegen::StubToolchain;
use uispec::retrieval::ExemplarStore;
use uispec_service::{router, AppState, ServiceConfig};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub fn config(data: &Path) -> ServiceConfig {
    let client = MockClient::new(fixtures().join("mock")).expect("mock fixtures load");
    let mut config = ServiceConfig::new(data, Arc::new(client), Arc::new(StubToolchain::default()));
    config.store = Some(Arc::new(
        ExemplarStore::open(fixtures().join("store/exemplars.jsonl")).expect("store fixture loads"),
    ));
    config.clock = Arc::new(|| "2026-01-01T00:00:00.000Z".to_string());
    config
}

pub struct TestApp {
    pub router: Router,
}

impl TestApp {
    pub fn new(data: &Path) -> Self {
        Self::with_config(config(data))
    }

    pub fn with_config(config: ServiceConfig) -> Self {
        Self {
            router: router(AppState::open(config).expect("state opens")),
        }
    }

    pub async fn send(&self, request: Request<Body>) -> (StatusCode, Vec<u8>) {
        let response = self
            .router
            .clone()
            .oneshot(request)
            .await
            .expect("router answers");
        let status = response.status();
        let body = response
            .into_body()
            .collect()
            .await
            .expect("body reads")
            .to_bytes();
        (status, body.to_vec())
    }

    pub async fn call(
        &self,
        method: Method,
        uri: &str,
        body: Option<Value>,
    ) -> (StatusCode, Value) {
        let mut builder = Request::builder().method(method).uri(uri);
        let body = match body {
            Some(v) => {
                builder = builder.header(header::CONTENT_TYPE, "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let (status, bytes) = self.send(builder.body(body).unwrap()).await;
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes)
                .unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
        };
        (status, value)
    }

    pub async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.call(Method::GET, uri, None).await
    }

    pub async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, uri, Some(body)).await
    }

    pub async fn new_session(&self) -> String {
        let (status, body) = self.call(Method::POST, "/api/v1/sessions", None).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        body["session_id"].as_str().unwrap().to_string()
    }

    /// Uploads `references/<name>.png` with its box sidecar as multipart.
    pub async fn upload(&self, session: &str, name: &str) -> (StatusCode, Value) {
        let dir = fixtures().join("references");
        let png = std::fs::read(dir.join(format!("{name}.png"))).unwrap();
        let boxes = std::fs::read_to_string(dir.join(format!("{name}.boxes.json"))).unwrap();
        let (content_type, body) = multipart(&[
            ("image", Some("reference.png"), png),
            ("boxes", None, boxes.into_bytes()),
            ("page_goal", None, b"session monitoring dashboard".to_vec()),
        ]);
        let request = Request::builder()
            .method(Method::POST)
            .uri(format!("/api/v1/sessions/{session}/references"))
            .header(header::CONTENT_TYPE, content_type)
            .body(Body::from(body))
            .unwrap();
        let (status, bytes) = self.send(request).await;
        (
            status,
            serde_json::from_slice(&bytes).unwrap_or(Value::Null),
        )
    }
}

pub fn multipart(fields: &[(&str, Option<&str>, Vec<u8>)]) -> (String, Vec<u8>) {
    let boundary = "----uispec-test-boundary";
    let mut body = Vec::new();
    for (name, filename, data) in fields {
        body.extend_from_slice(format!("--{boundary}\r\n").as_bytes());
        match filename {
            Some(f) => body.extend_from_slice(
                format!("Content-Disposition: form-data; name=\"{name}\"; filename=\"{f}\"\r\nContent-Type: image/png\r\n\r\n")
                    .as_bytes(),
            ),
            None => body.extend_from_slice(format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n").as_bytes()),
        }
        body.extend_from_slice(data);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={boundary}"), body)
}

pub const TECH_INTENT: &str = "Give the dashboard a tech-inspired dark palette.";
pub const CARDS_INTENT: &str = "Display using cards for the Online Sessions table.";

pub fn dashboard_selections() -> Value {
    json!({
        "page_goal": "session monitoring dashboard",
        "selections": [
            {"ref_id": "r-3", "path": "/global/colors"},
            {"ref_id": "r-3", "path": "/global/shape"},
            {"ref_id": "r-1", "path": "/global/layout"},
            {"ref_id": "r-1", "path": "/sections/#sec-1"},
            {"ref_id": "r-1", "path": "/sections/#sec-2/components/#sec-2-c2"},
            {"ref_id": "r-2", "path": "/sections/#sec-2"}
        ]
    })
}

/// Every response of the dashboard walk-through, in order.
pub struct Walkthrough {
    pub session: String,
    pub uploads: Vec<Value>,
    pub composed: Value,
    pub edits: Vec<Value>,
    pub generated: Value,
}

/// Upload three references, compose, apply two intents, generate.
pub async fn dashboard_walkthrough(app: &TestApp) -> Walkthrough {
    let session = app.new_session().await;
    let mut uploads = Vec::new();
    for name in ["ref-a", "ref-b", "ref-c"] {
        let (status, body) = app.upload(&session, name).await;
        assert_eq!(status, StatusCode::CREATED, "{name}: {body}");
        uploads.push(body);
    }
    let base = format!("/api/v1/sessions/{session}");
    let (status, composed) = app
        .post(&format!("{base}/compose"), dashboard_selections())
        .await;
    assert_eq!(status, StatusCode::CREATED, "{composed}");
    let mut edits = Vec::new();
    for intent in [TECH_INTENT, CARDS_INTENT] {
        let (status, body) = app
            .post(&format!("{base}/edit"), json!({"intent": intent}))
            .await;
        assert_eq!(status, StatusCode::OK, "{intent}: {body}");
        edits.push(body);
    }
    let (status, generated) = app
        .call(Method::POST, &format!("{base}/generate"), None)
        .await;
    assert_eq!(status, StatusCode::OK, "{generated}");
    Walkthrough {
        session,
        uploads,
        composed,
        edits,
        generated,
    }
}

/// Every file under `dir`, relative path to bytes.
pub fn snapshot(dir: &Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut std::collections::BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .replace('\\', "/");
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = Default::default();
    walk(dir, dir, &mut out);
    out
}
