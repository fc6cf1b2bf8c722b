//! `<operation, path, value>` edit instructions.
//!
//! Application works on the JSON tree of a document and re-reads the result
//! through the typed schema, so every node whose path is disjoint from the
//! edited one is carried over untouched. Batches are all-or-nothing.

mod intent;
mod repair;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::spec::{
    canonical_check, path_internals, ComponentVocabulary, PathError, PathSegment, SpecDocument,
    SpecPath,
};

pub use intent::{interpret_intent, parse_instructions, IntentError, ProtocolError};
pub use repair::{
    apply_with_repair, apply_with_repair_opts, EditErrorContext, EditOutcome, RepairError,
    RepairOptions, MAX_REPAIR_ROUNDS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditOp {
    Replace,
    Insert,
    Remove,
}

/// One edit. `value` is required for replace and insert and absent for
/// remove; the wire form enforces this on deserialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WireInstruction")]
pub struct EditInstruction {
    pub op: EditOp,
    pub path: SpecPath,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireInstruction {
    op: EditOp,
    path: SpecPath,
    #[serde(default)]
    value: Option<Value>,
}

impl TryFrom<WireInstruction> for EditInstruction {
    type Error = String;

    fn try_from(wire: WireInstruction) -> Result<Self, Self::Error> {
        let instruction = EditInstruction {
            op: wire.op,
            path: wire.path,
            value: wire.value,
        };
        instruction.check_shape().map_err(|e| e.to_string())?;
        Ok(instruction)
    }
}

impl EditInstruction {
    pub fn replace(path: SpecPath, value: impl Into<Value>) -> Self {
        Self {
            op: EditOp::Replace,
            path,
            value: Some(value.into()),
        }
    }

    pub fn insert(path: SpecPath, value: impl Into<Value>) -> Self {
        Self {
            op: EditOp::Insert,
            path,
            value: Some(value.into()),
        }
    }

    pub fn remove(path: SpecPath) -> Self {
        Self {
            op: EditOp::Remove,
            path,
            value: None,
        }
    }

    fn check_shape(&self) -> Result<(), EditError> {
        match (self.op, &self.value) {
            (EditOp::Remove, Some(_)) => {
                Err(EditError::Malformed("remove must not carry a value".into()))
            }
            (EditOp::Replace | EditOp::Insert, None) => Err(EditError::Malformed(format!(
                "{:?} requires a value",
                self.op
            ))),
            _ => Ok(()),
        }
    }

    /// Reads one instruction per non-blank line.
    pub fn parse_jsonl(text: &str) -> Result<Vec<EditInstruction>, serde_json::Error> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect()
    }

    pub fn to_jsonl(edits: &[EditInstruction]) -> String {
        edits
            .iter()
            .map(|e| serde_json::to_string(e).expect("edits serialize") + "\n")
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditError {
    #[error("path not found: {0}")]
    PathNotFound(String),
    #[error("ambiguous path (duplicate id): {0}")]
    PathAmbiguous(String),
    #[error("type mismatch at {path}: {reason}")]
    TypeMismatch { path: String, reason: String },
    #[error("component type {0:?} is not in the vocabulary")]
    VocabularyError(String),
    #[error("id collision: {0:?} already exists")]
    IdCollision(String),
    #[error("invalid value at {path}: {reason}")]
    Constraint { path: String, reason: String },
    #[error("malformed instruction: {0}")]
    Malformed(String),
}

impl From<PathError> for EditError {
    fn from(e: PathError) -> Self {
        match e {
            PathError::NotFound(p) => EditError::PathNotFound(p),
            PathError::Ambiguous(p) => EditError::PathAmbiguous(p),
            PathError::Malformed { path, reason } => {
                EditError::Malformed(format!("{path}: {reason}"))
            }
        }
    }
}

/// A failed batch: which instruction failed and why.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("edit {index} failed: {error}")]
pub struct BatchError {
    pub index: usize,
    pub error: EditError,
}

pub fn apply_edit(doc: &SpecDocument, edit: &EditInstruction) -> Result<SpecDocument, EditError> {
    apply_edit_with(doc, edit, &ComponentVocabulary::default())
}

pub fn apply_edit_with(
    doc: &SpecDocument,
    edit: &EditInstruction,
    vocab: &ComponentVocabulary,
) -> Result<SpecDocument, EditError> {
    edit.check_shape()?;
    let mut root = serde_json::to_value(doc).expect("spec documents always serialize");
    let path_text = edit.path.to_string();
    let mismatch = |reason: &str| EditError::TypeMismatch {
        path: path_text.clone(),
        reason: reason.to_string(),
    };

    match edit.op {
        EditOp::Replace => {
            let value = edit.value.clone().expect("shape checked");
            let concrete = path_internals::concretize(&root, &edit.path)?;
            let node = path_internals::get_mut(&mut root, &concrete)
                .ok_or_else(|| EditError::PathNotFound(path_text.clone()))?;
            *node = value;
        }
        EditOp::Insert => {
            let value = edit.value.clone().expect("shape checked");
            let (parent, last) = edit
                .path
                .parent()
                .ok_or_else(|| mismatch("cannot insert at the document root"))?;
            let concrete = path_internals::concretize(&root, &parent)?;
            let target = path_internals::get_mut(&mut root, &concrete)
                .ok_or_else(|| EditError::PathNotFound(path_text.clone()))?;
            let Value::Array(items) = target else {
                return Err(mismatch("insert target is not a list"));
            };
            let at = match last {
                PathSegment::Index(i) if *i <= items.len() => *i,
                PathSegment::Index(_) => return Err(EditError::PathNotFound(path_text.clone())),
                PathSegment::Append => items.len(),
                _ => return Err(mismatch("insert position must be an index or '-'")),
            };
            items.insert(at, value);
        }
        EditOp::Remove => {
            let (parent, _) = edit
                .path
                .parent()
                .ok_or_else(|| mismatch("cannot remove the document root"))?;
            let concrete = path_internals::concretize(&root, &edit.path)?;
            let Some((_, PathSegment::Index(at))) = concrete.parent() else {
                return Err(mismatch("only list elements can be removed"));
            };
            let at = *at;
            let parent_concrete = path_internals::concretize(&root, &parent)?;
            match path_internals::get_mut(&mut root, &parent_concrete) {
                Some(Value::Array(items)) => {
                    items.remove(at);
                }
                _ => return Err(mismatch("only list elements can be removed")),
            }
        }
    }

    let next: SpecDocument = serde_json::from_value(root).map_err(|e| mismatch(&e.to_string()))?;

    let mut ids = HashSet::new();
    if let Some(dup) = next.ids().find(|id| !ids.insert(*id)) {
        return Err(EditError::IdCollision(dup.to_string()));
    }
    canonical_check(&next).map_err(|reason| EditError::Constraint {
        path: path_text.clone(),
        reason,
    })?;

    let before: HashSet<(&str, &str)> = doc
        .components()
        .map(|c| (c.id.as_str(), c.kind.as_str()))
        .collect();
    if let Some(bad) = next
        .components()
        .find(|c| !before.contains(&(c.id.as_str(), c.kind.as_str())) && !vocab.contains(&c.kind))
    {
        return Err(EditError::VocabularyError(bad.kind.clone()));
    }

    Ok(next)
}

/// Applies a batch in order; on any failure returns the failing index and
/// leaves no partial result.
pub fn apply_edits(
    doc: &SpecDocument,
    edits: &[EditInstruction],
) -> Result<SpecDocument, BatchError> {
    apply_edits_with(doc, edits, &ComponentVocabulary::default())
}

pub fn apply_edits_with(
    doc: &SpecDocument,
    edits: &[EditInstruction],
    vocab: &ComponentVocabulary,
) -> Result<SpecDocument, BatchError> {
    let mut current = doc.clone();
    for (index, edit) in edits.iter().enumerate() {
        current =
            apply_edit_with(&current, edit, vocab).map_err(|error| BatchError { index, error })?;
    }
    Ok(current)
}
