use serde::Serialize;

use super::toolchain::{compile_check, CompileResult, Toolchain};
use super::{
    check_marker_contract, marker_re, parse_file_blocks, CodeArtifact, CodegenConfig, CodegenError,
};
use crate::client::{ModelClient, ModelRequest, Task};
use crate::spec::{serialize_spec, SpecDocument, SpecPath};

/// Revision requests per [`debug_loop`] run, after the initial compile.
pub const MAX_REVISIONS: usize = 3;

const SNIPPET_RADIUS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorReport {
    pub error_type: String,
    pub file: String,
    pub line: usize,
    /// The diagnostic line with up to three lines of context either side.
    pub snippet: String,
    pub message: String,
    /// The section whose marker most closely precedes the failing line.
    pub region_path: Option<SpecPath>,
}

/// Structured report for the first diagnostic of a failed compile.
pub fn make_error_report(
    result: &CompileResult,
    artifact: &CodeArtifact,
    doc: &SpecDocument,
    marker_attribute: &str,
) -> ErrorReport {
    let Some(d) = result.diagnostics.first() else {
        return ErrorReport {
            error_type: "Unknown".into(),
            file: String::new(),
            line: 0,
            snippet: String::new(),
            message: "compile failed without diagnostics".into(),
            region_path: None,
        };
    };
    let text = artifact
        .files
        .get(&d.file)
        .map(String::as_str)
        .unwrap_or("");
    let lines: Vec<&str> = text.split('\n').collect();
    let line = d.line.max(1);
    let (snippet, region_path) = if text.is_empty() || line > lines.len() {
        (String::new(), None)
    } else {
        let first = line.saturating_sub(SNIPPET_RADIUS).max(1);
        let last = (line + SNIPPET_RADIUS).min(lines.len());
        let snippet = lines[first - 1..last].join("\n");
        (
            snippet,
            enclosing_section(&lines[..line], doc, marker_attribute),
        )
    };
    ErrorReport {
        error_type: d.error_type.clone(),
        file: d.file.clone(),
        line: d.line,
        snippet,
        message: d.message.clone(),
        region_path,
    }
}

fn enclosing_section(lines: &[&str], doc: &SpecDocument, attribute: &str) -> Option<SpecPath> {
    let re = marker_re(attribute);
    lines
        .iter()
        .rev()
        .find_map(|l| {
            re.captures_iter(l)
                .filter(|c| doc.section(&c[1]).is_some())
                .last()
                .map(|c| c[1].to_string())
        })
        .map(|id| SpecPath::section(&id))
}

#[derive(Debug, Clone, Serialize)]
pub struct DebugOutcome {
    pub artifact: CodeArtifact,
    pub result: CompileResult,
    /// Revision requests sent to the client.
    pub revisions: usize,
    /// One report per failed compile that led to a revision request.
    pub reports: Vec<ErrorReport>,
}

const REVISION_PROMPT: &str = "\
## task: code-revision
The generated code below failed to compile. The structured error report
gives the error type, the affected snippet, the diagnostic message and the
SPEC region it maps to. Fix the error without changing unrelated code, keep
every section marker, and answer with the complete revised files using the
same `=== file: <path> ===` headers. Files you do not return stay as they are.
";

fn revision_prompt(doc: &SpecDocument, artifact: &CodeArtifact, report: &ErrorReport) -> String {
    let mut code = String::new();
    for (path, text) in &artifact.files {
        code.push_str(&format!("=== file: {path} ===\n{text}"));
        if !text.ends_with('\n') {
            code.push('\n');
        }
    }
    format!(
        "{REVISION_PROMPT}\n### SPEC\n{}\n\n### Code\n{code}\n### Error report\n{}\n\n### Revised files\n",
        serialize_spec(doc),
        serde_json::to_string_pretty(report).expect("reports serialize")
    )
}

/// Compile, report, revise; at most [`MAX_REVISIONS`] revisions.
///
/// Returns the first artifact that compiles. Otherwise returns the attempt
/// with the fewest diagnostics (the latest one on ties), so the result is
/// never worse than the input. Revisions that drop or duplicate a section
/// marker are discarded.
pub fn debug_loop(
    artifact: &CodeArtifact,
    doc: &SpecDocument,
    client: &dyn ModelClient,
    toolchain: &dyn Toolchain,
    config: &CodegenConfig,
) -> Result<DebugOutcome, CodegenError> {
    let mut current = artifact.clone();
    let mut result = compile_check(&current, toolchain)?;
    let mut best = (current.clone(), result.clone());
    let mut reports = Vec::new();
    let mut revisions = 0;

    while !result.ok && revisions < MAX_REVISIONS {
        let report = make_error_report(&result, &current, doc, &config.marker_attribute);
        let prompt = revision_prompt(doc, &current, &report);
        reports.push(report);
        revisions += 1;
        let answer = client.complete(&ModelRequest::text(Task::CodeRevision, prompt))?;

        let Ok(files) = parse_file_blocks(&answer) else {
            continue;
        };
        let mut revised = current.clone();
        revised.files.extend(files);
        if check_marker_contract(&revised, doc, &config.marker_attribute).is_err() {
            continue;
        }
        let revised_result = compile_check(&revised, toolchain)?;
        if revised_result.ok {
            return Ok(DebugOutcome {
                artifact: revised,
                result: revised_result,
                revisions,
                reports,
            });
        }
        if revised_result.diagnostics.len() <= best.1.diagnostics.len() {
            best = (revised.clone(), revised_result.clone());
        }
        current = revised;
        result = revised_result;
    }

    if result.ok {
        return Ok(DebugOutcome {
            artifact: current,
            result,
            revisions,
            reports,
        });
    }
    Ok(DebugOutcome {
        artifact: best.0,
        result: best.1,
        revisions,
        reports,
    })
}
