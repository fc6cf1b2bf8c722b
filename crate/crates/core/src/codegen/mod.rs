//! SPEC to front-end source through a code-model client.
//!
//! Model output is split into files by `=== file: <path> ===` headers. Every
//! section of the source document must be tagged exactly once in the
//! generated code with a marker attribute (`data-spec-id="<id>"` by
//! default); the marker ties rendered elements and compiler diagnostics back
//! to SPEC sections.

mod debug;
mod toolchain;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::client::{ClientError, ModelClient, ModelRequest, Task};
use crate::retrieval::{build_fewshot_block, ExemplarStore, RetrievalHit, StoreError};
use crate::spec::{serialize_spec, ComponentVocabulary, SpecDocument};
use crate::validate::{validate_with, ValidationReport};

pub use debug::{debug_loop, make_error_report, DebugOutcome, ErrorReport, MAX_REVISIONS};
pub use toolchain::{
    compile_check, parse_diagnostics, CommandToolchain, CompileResult, Diagnostic, StubToolchain,
    Toolchain, ToolchainError,
};

pub const DEFAULT_MARKER_ATTRIBUTE: &str = "data-spec-id";
pub const DEFAULT_TARGET: &str = "react";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeArtifact {
    /// Relative, normalized path to file contents.
    pub files: BTreeMap<String, String>,
    pub target: String,
    /// SHA-256 of the canonical SPEC the code was generated from.
    pub spec_hash: String,
}

#[derive(Debug, Clone)]
pub struct CodegenConfig {
    pub target: String,
    pub marker_attribute: String,
    pub vocabulary: ComponentVocabulary,
}

impl Default for CodegenConfig {
    fn default() -> Self {
        Self {
            target: DEFAULT_TARGET.into(),
            marker_attribute: DEFAULT_MARKER_ATTRIBUTE.into(),
            vocabulary: ComponentVocabulary::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CodegenError {
    #[error("SPEC does not validate ({} violations)", .0.violations.len())]
    InvalidSpec(ValidationReport),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("marker contract violated: missing {missing:?}, repeated {repeated:?}")]
    Contract {
        missing: Vec<String>,
        repeated: Vec<String>,
    },
    #[error(transparent)]
    Toolchain(#[from] ToolchainError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

pub fn spec_hash(doc: &SpecDocument) -> String {
    hex::encode(Sha256::digest(serialize_spec(doc).as_bytes()))
}

const CODE_PROMPT: &str = "\
## task: code-generation
You are a front-end engineer. Implement the UI described by the SPEC below as
runnable source for the stated target framework. Follow the global
specification exactly: grid columns and spacing, palette roles and hex
values, corner radius and style labels. Build every section and component in
the page composition, in order, with the stated function.
Tag the root element of each section with the marker attribute and the
section id, exactly once per section. Components may carry the same
attribute with their own ids.
Answer with one or more files, each introduced by a header line
=== file: <relative path> ===
followed by the complete file contents.
";

fn generation_prompt(doc: &SpecDocument, fewshot: &str, config: &CodegenConfig) -> String {
    let fewshot = if fewshot.trim().is_empty() {
        format!("### TARGET SPEC\n{}\n", serialize_spec(doc))
    } else {
        fewshot.to_string()
    };
    format!(
        "{CODE_PROMPT}\ntarget: {}\nmarker attribute: {}\n\n{fewshot}\n### Files\n",
        config.target, config.marker_attribute
    )
}

/// Asks the client for an implementation of `doc`.
///
/// `fewshot` is normally [`build_fewshot_block`] output, which already ends
/// with the target SPEC; an empty string means no grounding.
pub fn generate_code(
    doc: &SpecDocument,
    fewshot: &str,
    client: &dyn ModelClient,
    config: &CodegenConfig,
) -> Result<CodeArtifact, CodegenError> {
    let report = validate_with(doc, &config.vocabulary);
    if !report.ok {
        return Err(CodegenError::InvalidSpec(report));
    }
    let request = ModelRequest::text(
        Task::CodeGeneration,
        generation_prompt(doc, fewshot, config),
    );
    let answer = client.complete(&request)?;
    let artifact = CodeArtifact {
        files: parse_file_blocks(&answer)?,
        target: config.target.clone(),
        spec_hash: spec_hash(doc),
    };
    check_marker_contract(&artifact, doc, &config.marker_attribute)?;
    Ok(artifact)
}

fn file_header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^=== file: (.+?) ===\s*$").unwrap())
}

/// Splits a model answer into files. Text before the first header is
/// ignored; a fence wrapping a file body is stripped.
pub fn parse_file_blocks(answer: &str) -> Result<BTreeMap<String, String>, CodegenError> {
    let mut files = BTreeMap::new();
    let mut current: Option<(String, Vec<&str>)> = None;
    let flush = |entry: Option<(String, Vec<&str>)>,
                 files: &mut BTreeMap<String, String>|
     -> Result<(), CodegenError> {
        if let Some((path, lines)) = entry {
            if files.insert(path.clone(), file_body(&lines)).is_some() {
                return Err(CodegenError::Protocol(format!(
                    "file {path:?} appears twice"
                )));
            }
        }
        Ok(())
    };
    for line in answer.lines() {
        if let Some(caps) = file_header_re().captures(line) {
            flush(current.take(), &mut files)?;
            current = Some((normalize_path(&caps[1])?, Vec::new()));
        } else if let Some((_, lines)) = current.as_mut() {
            lines.push(line);
        }
    }
    flush(current.take(), &mut files)?;
    if files.is_empty() {
        return Err(CodegenError::Protocol(
            "no `=== file: <path> ===` blocks in answer".into(),
        ));
    }
    Ok(files)
}

fn file_body(lines: &[&str]) -> String {
    let mut start = 0;
    let mut end = lines.len();
    while start < end && lines[start].trim().is_empty() {
        start += 1;
    }
    while end > start && lines[end - 1].trim().is_empty() {
        end -= 1;
    }
    if end - start >= 2
        && lines[start].trim_start().starts_with("```")
        && lines[end - 1].trim() == "```"
    {
        start += 1;
        end -= 1;
    }
    let mut body = lines[start..end].join("\n");
    body.push('\n');
    body
}

fn normalize_path(raw: &str) -> Result<String, CodegenError> {
    let raw = raw.trim().replace('\\', "/");
    let bad = || CodegenError::Protocol(format!("file path {raw:?} is not a relative path"));
    if raw.starts_with('/') || raw.contains(':') {
        return Err(bad());
    }
    let mut parts = Vec::new();
    for part in raw.split('/') {
        match part {
            "" | "." => {}
            ".." => return Err(bad()),
            p => parts.push(p),
        }
    }
    if parts.is_empty() {
        return Err(bad());
    }
    Ok(parts.join("/"))
}

pub(crate) fn marker_re(attribute: &str) -> Regex {
    Regex::new(&format!(r#"\b{}="([^"]*)""#, regex::escape(attribute))).expect("escaped attribute")
}

/// How often each marker id occurs across all files.
pub fn marker_counts(artifact: &CodeArtifact, attribute: &str) -> BTreeMap<String, usize> {
    let re = marker_re(attribute);
    let mut counts = BTreeMap::new();
    for text in artifact.files.values() {
        for caps in re.captures_iter(text) {
            *counts.entry(caps[1].to_string()).or_default() += 1;
        }
    }
    counts
}

/// Every section id must be tagged exactly once.
pub fn check_marker_contract(
    artifact: &CodeArtifact,
    doc: &SpecDocument,
    attribute: &str,
) -> Result<(), CodegenError> {
    let counts = marker_counts(artifact, attribute);
    let mut missing = Vec::new();
    let mut repeated = Vec::new();
    for s in &doc.sections {
        match counts.get(&s.id).copied().unwrap_or(0) {
            0 => missing.push(s.id.clone()),
            1 => {}
            _ => repeated.push(s.id.clone()),
        }
    }
    if missing.is_empty() && repeated.is_empty() {
        Ok(())
    } else {
        Err(CodegenError::Contract { missing, repeated })
    }
}

/// Result of [`generate_ui`].
#[derive(Debug, Clone, Serialize)]
pub struct GenerationOutcome {
    pub hits: Vec<RetrievalHit>,
    pub artifact: CodeArtifact,
    pub compile: CompileResult,
    pub revisions: usize,
    pub reports: Vec<ErrorReport>,
}

/// Retrieve, generate, then run the debug loop. Without a store (or with an
/// empty one) generation proceeds ungrounded.
pub fn generate_ui(
    doc: &SpecDocument,
    store: Option<&ExemplarStore>,
    k: usize,
    client: &dyn ModelClient,
    toolchain: &dyn Toolchain,
    config: &CodegenConfig,
) -> Result<GenerationOutcome, CodegenError> {
    let report = validate_with(doc, &config.vocabulary);
    if !report.ok {
        return Err(CodegenError::InvalidSpec(report));
    }
    let (hits, fewshot) = match store {
        Some(store) if !store.is_empty() => {
            let hits = store.query(doc, k)?;
            let block = build_fewshot_block(doc, &hits, store)?;
            (hits, block)
        }
        _ => (Vec::new(), String::new()),
    };
    let artifact = generate_code(doc, &fewshot, client, config)?;
    let outcome = debug_loop(&artifact, doc, client, toolchain, config)?;
    Ok(GenerationOutcome {
        hits,
        artifact: outcome.artifact,
        compile: outcome.result,
        revisions: outcome.revisions,
        reports: outcome.reports,
    })
}
