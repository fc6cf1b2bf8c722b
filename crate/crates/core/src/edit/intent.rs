use serde_json::Value;
use thiserror::Error;

use super::{EditInstruction, EditOp};
use crate::client::{ClientError, ModelClient, ModelRequest, Task};
use crate::spec::{serialize_spec, SpecDocument, SpecPath};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("unparseable model output: {0}")]
    Unparseable(String),
}

#[derive(Debug, Error)]
pub enum IntentError {
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

const INTENT_HEADER: &str = "\
## task: edit-intent
You are the Edit Generator for a structured UI specification (SPEC).
Translate the designer's request into edit triplets <operation, path, value>.
Operations are replace, insert and remove. Paths are slash-separated:
field names, zero-based list indices, `#<id>` for a section or component,
and a trailing `-` to append to a list. Values are JSON fragments that fit
the schema at the path. Change only what the request asks for.
Answer with one JSON object per line, e.g.
{\"op\":\"replace\",\"path\":\"/global/shape/corner_radius_px\",\"value\":4}
or with [] when no edit is needed.
";

const FEW_SHOT: &str = "\
### Example
Request: Use a darker, tech-inspired look.
Edits:
{\"op\":\"replace\",\"path\":\"/global/shape/semantic\",\"value\":[\"Tech-oriented dark background with neon-accented charts\"]}

### Example
Request: Show the online sessions as cards instead of a table.
Edits:
{\"op\":\"replace\",\"path\":\"/sections/#sec-2/components/#sec-2-c1/func\",\"value\":\"display using cards\"}

### Example
Request: Drop the footer and add a search bar to the header.
Edits:
{\"op\":\"remove\",\"path\":\"/sections/#sec-4\"}
{\"op\":\"insert\",\"path\":\"/sections/#sec-1/components/-\",\"value\":{\"type\":\"SearchBar\",\"id\":\"sec-1-c9\",\"func\":\"search\",\"layout\":{\"grid_rows\":1,\"grid_cols\":1,\"spacing_px\":8},\"colors\":[]}}
";

pub(crate) fn intent_prompt(intent: &str, reference: Option<&Value>, doc: &SpecDocument) -> String {
    let reference = reference
        .map(|r| serde_json::to_string(r).expect("json values serialize"))
        .unwrap_or_else(|| "(none)".into());
    format!(
        "{INTENT_HEADER}\n{FEW_SHOT}\n### Current SPEC\n{}\n\n### Reference fragment\n{reference}\n\n### Request\n{intent}\n\n### Edits\n",
        serialize_spec(doc)
    )
}

/// Asks the client to turn an editing intent into instructions.
pub fn interpret_intent(
    intent: &str,
    reference: Option<&Value>,
    doc: &SpecDocument,
    client: &dyn ModelClient,
) -> Result<Vec<EditInstruction>, IntentError> {
    let request = ModelRequest::text(Task::EditIntent, intent_prompt(intent, reference, doc));
    let answer = client.complete(&request)?;
    Ok(parse_instructions(&answer)?)
}

/// Parses a model answer into instructions.
///
/// Accepted forms: a JSON array of instruction objects, one JSON object per
/// line, or one `<op, path, value>` triplet per line; any of these may sit in
/// a fenced block. A line that fits none of them fails the whole answer.
pub fn parse_instructions(answer: &str) -> Result<Vec<EditInstruction>, ProtocolError> {
    let body = fenced_body(answer).unwrap_or(answer).trim();
    if body.is_empty() {
        return Ok(Vec::new());
    }
    if body.starts_with('[') {
        return serde_json::from_str(body)
            .map_err(|e| ProtocolError::Unparseable(format!("instruction array: {e}")));
    }
    body.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(parse_line)
        .collect()
}

fn fenced_body(text: &str) -> Option<&str> {
    let open = text.find("```")?;
    let body_start = open + 3 + text[open + 3..].find('\n')? + 1;
    let close = text[body_start..].find("```")?;
    Some(&text[body_start..body_start + close])
}

fn parse_line(line: &str) -> Result<EditInstruction, ProtocolError> {
    if line.starts_with('{') {
        return serde_json::from_str(line)
            .map_err(|e| ProtocolError::Unparseable(format!("{line:?}: {e}")));
    }
    if let Some(inner) = line.strip_prefix('<').and_then(|l| l.strip_suffix('>')) {
        return parse_triplet(inner)
            .map_err(|reason| ProtocolError::Unparseable(format!("{line:?}: {reason}")));
    }
    Err(ProtocolError::Unparseable(format!(
        "{line:?} is neither a JSON instruction nor a triplet"
    )))
}

fn parse_triplet(inner: &str) -> Result<EditInstruction, String> {
    let (op, rest) = match inner.split_once(',') {
        Some((op, rest)) => (op.trim(), Some(rest)),
        None => (inner.trim(), None),
    };
    let op = match op.to_ascii_lowercase().as_str() {
        "replace" => EditOp::Replace,
        "insert" => EditOp::Insert,
        "remove" => EditOp::Remove,
        other => return Err(format!("unknown operation {other:?}")),
    };
    let rest = rest.ok_or("missing path")?;
    let (path, value) = match rest.split_once(',') {
        Some((path, value)) => (path.trim(), Some(value.trim())),
        None => (rest.trim(), None),
    };
    let path: SpecPath = path.parse().map_err(|e| format!("{e}"))?;
    let value = value
        .filter(|v| !v.is_empty())
        .map(|v| serde_json::from_str::<Value>(v).map_err(|e| format!("value: {e}")))
        .transpose()?;
    let instruction = EditInstruction { op, path, value };
    instruction.check_shape().map_err(|e| e.to_string())?;
    Ok(instruction)
}
