//! A model client for a JSON completion endpoint.
//!
//! Request body: `{"task": "<task>", "prompt": "...", "image_png_base64": "..."?}`.
//! The answer is either `{"text": "..."}` or a plain-text body.

use std::time::Duration;

use base64::Engine;
use serde::Serialize;
use uispec::client::{ClientError, ModelClient, ModelRequest};

pub const ENDPOINT_VAR: &str = "SPEC_MODEL_ENDPOINT";
pub const KEY_VAR: &str = "SPEC_MODEL_KEY";

#[derive(Debug)]
pub struct HttpModelClient {
    endpoint: String,
    key: Option<String>,
    http: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct Body<'a> {
    task: &'a str,
    prompt: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    image_png_base64: Option<String>,
}

impl HttpModelClient {
    pub fn new(endpoint: impl Into<String>, key: Option<String>) -> Result<Self, ClientError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            key,
            http,
        })
    }

    /// Reads `SPEC_MODEL_ENDPOINT` and `SPEC_MODEL_KEY`.
    pub fn from_env() -> Option<Result<Self, ClientError>> {
        let endpoint = std::env::var(ENDPOINT_VAR).ok()?;
        Some(Self::new(endpoint, std::env::var(KEY_VAR).ok()))
    }
}

impl ModelClient for HttpModelClient {
    fn complete(&self, request: &ModelRequest) -> Result<String, ClientError> {
        let body = Body {
            task: request.task.as_str(),
            prompt: &request.prompt,
            image_png_base64: request
                .image
                .as_ref()
                .map(|png| base64::engine::general_purpose::STANDARD.encode(png)),
        };
        let mut call = self.http.post(&self.endpoint).json(&body);
        if let Some(key) = &self.key {
            call = call.bearer_auth(key);
        }
        let response = call
            .send()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ClientError::Transport(format!("{status}: {}", text.trim())));
        }
        match serde_json::from_str::<serde_json::Value>(&text) {
            Ok(serde_json::Value::Object(map)) => map
                .get("text")
                .and_then(|t| t.as_str())
                .map(str::to_string)
                .ok_or_else(|| {
                    ClientError::Transport("response object has no \"text\" field".into())
                }),
            _ => Ok(text),
        }
    }
}

/// Answers every request with an error; used when no model is configured.
#[derive(Debug, Default)]
pub struct UnconfiguredClient;

impl ModelClient for UnconfiguredClient {
    fn complete(&self, request: &ModelRequest) -> Result<String, ClientError> {
        Err(ClientError::Transport(format!(
            "no model client configured for {} (set {ENDPOINT_VAR} or SPEC_MOCK_DIR)",
            request.task
        )))
    }
}
