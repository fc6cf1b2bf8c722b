use std::fs;
use std::io::ErrorKind;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{marker_re, CodeArtifact, DEFAULT_MARKER_ATTRIBUTE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub error_type: String,
    pub file: String,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileResult {
    pub ok: bool,
    pub diagnostics: Vec<Diagnostic>,
}

impl CompileResult {
    pub fn from_diagnostics(diagnostics: Vec<Diagnostic>) -> Self {
        Self {
            ok: diagnostics.is_empty(),
            diagnostics,
        }
    }
}

#[derive(Debug, Error)]
pub enum ToolchainError {
    #[error("toolchain unavailable: {0}")]
    Unavailable(String),
    #[error("toolchain scratch directory: {0}")]
    Io(#[from] std::io::Error),
}

/// Checks an artifact written out to `dir`.
pub trait Toolchain: Send + Sync {
    fn compile(&self, dir: &Path, artifact: &CodeArtifact)
        -> Result<CompileResult, ToolchainError>;
}

/// Writes the artifact to a private scratch directory and runs the toolchain.
pub fn compile_check(
    artifact: &CodeArtifact,
    toolchain: &dyn Toolchain,
) -> Result<CompileResult, ToolchainError> {
    let scratch = tempfile::tempdir()?;
    for (path, text) in &artifact.files {
        let target = scratch.path().join(path);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(target, text)?;
    }
    toolchain.compile(scratch.path(), artifact)
}

/// Structural checker: balanced `()[]{}` outside double-quoted and
/// backtick strings (one diagnostic per file at most) and well-formed
/// marker attributes.
#[derive(Debug, Clone)]
pub struct StubToolchain {
    pub marker_attribute: String,
}

impl Default for StubToolchain {
    fn default() -> Self {
        Self {
            marker_attribute: DEFAULT_MARKER_ATTRIBUTE.into(),
        }
    }
}

impl StubToolchain {
    pub fn check_file(&self, file: &str, text: &str) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if let Some(d) = balance(file, text) {
            out.push(d);
        }
        let well_formed = marker_re(&self.marker_attribute);
        let attr = format!("{}=", self.marker_attribute);
        for (i, line) in text.split('\n').enumerate() {
            let good = well_formed
                .captures_iter(line)
                .filter(|c| crate::spec::is_addressable_id(&c[1]))
                .count();
            if line.matches(attr.as_str()).count() > good {
                out.push(Diagnostic {
                    error_type: "MarkerError".into(),
                    file: file.into(),
                    line: i + 1,
                    message: format!("malformed {} attribute", self.marker_attribute),
                });
            }
        }
        out.sort_by_key(|d| d.line);
        out
    }
}

impl Toolchain for StubToolchain {
    fn compile(
        &self,
        _dir: &Path,
        artifact: &CodeArtifact,
    ) -> Result<CompileResult, ToolchainError> {
        let diagnostics = artifact
            .files
            .iter()
            .flat_map(|(path, text)| self.check_file(path, text))
            .collect();
        Ok(CompileResult::from_diagnostics(diagnostics))
    }
}

fn balance(file: &str, text: &str) -> Option<Diagnostic> {
    let mut stack: Vec<(char, usize)> = Vec::new();
    let mut line = 1;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    let diag = |line: usize, message: String| Diagnostic {
        error_type: "SyntaxError".into(),
        file: file.into(),
        line,
        message,
    };
    for ch in text.chars() {
        if ch == '\n' {
            line += 1;
        }
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if ch == '\\' {
                escaped = true;
            } else if ch == q || (q == '"' && ch == '\n') {
                quote = None;
            }
            continue;
        }
        match ch {
            '"' | '`' => quote = Some(ch),
            '(' | '[' | '{' => stack.push((ch, line)),
            ')' | ']' | '}' => {
                let open = match ch {
                    ')' => '(',
                    ']' => '[',
                    _ => '{',
                };
                match stack.pop() {
                    Some((o, _)) if o == open => {}
                    Some((o, at)) => {
                        return Some(diag(
                            line,
                            format!("unexpected `{ch}`, `{o}` from line {at} is still open"),
                        ))
                    }
                    None => {
                        return Some(diag(line, format!("unexpected `{ch}` with nothing open")))
                    }
                }
            }
            _ => {}
        }
    }
    if quote == Some('`') {
        return Some(diag(line, "unterminated template literal".into()));
    }
    stack
        .pop()
        .map(|(o, at)| diag(at, format!("`{o}` is never closed")))
}

/// An external checker: a program plus arguments, where `{dir}` expands to
/// the scratch directory. Diagnostics are read from output lines of the form
/// `file:line: type: message`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandToolchain {
    pub program: String,
    pub args: Vec<String>,
}

impl CommandToolchain {
    /// Splits a command line on whitespace.
    pub fn parse(command: &str) -> Option<Self> {
        let mut parts = command.split_whitespace().map(str::to_string);
        Some(Self {
            program: parts.next()?,
            args: parts.collect(),
        })
    }
}

impl Toolchain for CommandToolchain {
    fn compile(
        &self,
        dir: &Path,
        _artifact: &CodeArtifact,
    ) -> Result<CompileResult, ToolchainError> {
        let dir_text = dir.to_string_lossy();
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| a.replace("{dir}", &dir_text))
            .collect();
        let output = Command::new(&self.program)
            .args(&args)
            .current_dir(dir)
            .output()
            .map_err(|e| match e.kind() {
                ErrorKind::NotFound | ErrorKind::PermissionDenied => {
                    ToolchainError::Unavailable(format!("{}: {e}", self.program))
                }
                _ => ToolchainError::Io(e),
            })?;
        let text = format!(
            "{}\n{}",
            String::from_utf8_lossy(&output.stdout),
            String::from_utf8_lossy(&output.stderr)
        );
        let mut diagnostics = parse_diagnostics(&text, Some(dir));
        if !output.status.success() && diagnostics.is_empty() {
            let last = text
                .lines()
                .rev()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("");
            diagnostics.push(Diagnostic {
                error_type: "ToolchainError".into(),
                file: String::new(),
                line: 0,
                message: format!("{} ({})", last.trim(), output.status),
            });
        }
        Ok(CompileResult::from_diagnostics(diagnostics))
    }
}

fn diagnostic_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(.+?):(\d+): ([^:]+): (.*)$").unwrap())
}

/// Reads `file:line: type: message` lines; paths under `root` are made
/// relative to it.
pub fn parse_diagnostics(text: &str, root: Option<&Path>) -> Vec<Diagnostic> {
    text.lines()
        .filter_map(|l| diagnostic_re().captures(l.trim_end()))
        .map(|c| {
            let mut file = c[1].trim().to_string();
            if let Some(rest) = root.and_then(|r| Path::new(&file).strip_prefix(r).ok()) {
                file = rest.to_string_lossy().replace('\\', "/");
            }
            Diagnostic {
                error_type: c[3].trim().to_string(),
                file,
                line: c[2].parse().unwrap_or(0),
                message: c[4].trim().to_string(),
            }
        })
        .collect()
}
