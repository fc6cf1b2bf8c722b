//! Slash-separated addressing into a document.
//!
//! Segments are field names, zero-based list indices, `#<id>` references to a
//! section or component, or the trailing `-` append marker (insert only).
//! A handful of legacy style names are rewritten onto the formal schema when
//! a path is parsed, e.g. `/VisualStyle/DesignStyle` becomes
//! `/global/shape/semantic`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

use super::{is_addressable_id, SpecDocument};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PathSegment {
    Field(String),
    Index(usize),
    Id(String),
    Append,
}

impl fmt::Display for PathSegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathSegment::Field(name) => f.write_str(name),
            PathSegment::Index(i) => write!(f, "{i}"),
            PathSegment::Id(id) => write!(f, "#{id}"),
            PathSegment::Append => f.write_str("-"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SpecPath {
    segments: Vec<PathSegment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("malformed path {path:?}: {reason}")]
    Malformed { path: String, reason: String },
    #[error("path not found: {0}")]
    NotFound(String),
    #[error("path is ambiguous (duplicate id): {0}")]
    Ambiguous(String),
}

/// Legacy names and the canonical segments they stand for.
const ALIASES: &[(&str, &[&str])] = &[
    ("VisualStyle", &["global"]),
    ("DesignStyle", &["shape", "semantic"]),
    ("PageGoal", &["page_goal"]),
    ("LayoutStructure", &["layout"]),
    ("ColorSystem", &["colors"]),
    ("ShapeLanguage", &["shape"]),
];

impl SpecPath {
    pub fn root() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, PathError> {
        text.parse()
    }

    pub fn segments(&self) -> &[PathSegment] {
        &self.segments
    }

    pub fn is_root(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn push(mut self, segment: PathSegment) -> Self {
        self.segments.push(segment);
        self
    }

    pub fn field(self, name: &str) -> Self {
        self.push(PathSegment::Field(name.to_string()))
    }

    pub fn index(self, i: usize) -> Self {
        self.push(PathSegment::Index(i))
    }

    pub fn id(self, id: &str) -> Self {
        self.push(PathSegment::Id(id.to_string()))
    }

    pub fn parent(&self) -> Option<(SpecPath, &PathSegment)> {
        let (last, rest) = self.segments.split_last()?;
        Some((
            SpecPath {
                segments: rest.to_vec(),
            },
            last,
        ))
    }

    pub fn starts_with(&self, prefix: &SpecPath) -> bool {
        self.segments.starts_with(&prefix.segments)
    }

    /// `/sections/#<id>` for a section.
    pub fn section(id: &str) -> Self {
        Self::root().field("sections").id(id)
    }

    /// `/sections/#<section>/components/#<component>`.
    pub fn component(section: &str, component: &str) -> Self {
        Self::section(section).field("components").id(component)
    }
}

impl FromStr for SpecPath {
    type Err = PathError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let malformed = |reason: &str| PathError::Malformed {
            path: text.to_string(),
            reason: reason.to_string(),
        };
        if text.is_empty() || text == "/" {
            return Ok(Self::root());
        }
        let rest = text
            .strip_prefix('/')
            .ok_or_else(|| malformed("must start with '/'"))?;
        let parts: Vec<&str> = rest.split('/').collect();
        let mut segments = Vec::with_capacity(parts.len());
        for (i, part) in parts.iter().enumerate() {
            if part.is_empty() {
                return Err(malformed("empty segment"));
            }
            if *part == "-" {
                if i + 1 != parts.len() {
                    return Err(malformed("'-' is only allowed as the last segment"));
                }
                segments.push(PathSegment::Append);
            } else if let Some(id) = part.strip_prefix('#') {
                if !is_addressable_id(id) {
                    return Err(malformed("empty or invalid id reference"));
                }
                segments.push(PathSegment::Id(id.to_string()));
            } else if part.bytes().all(|b| b.is_ascii_digit()) {
                let index = part.parse().map_err(|_| malformed("index out of range"))?;
                segments.push(PathSegment::Index(index));
            } else if let Some((_, target)) = ALIASES.iter().find(|(alias, _)| alias == part) {
                segments.extend(target.iter().map(|t| PathSegment::Field(t.to_string())));
            } else {
                segments.push(PathSegment::Field(part.to_string()));
            }
        }
        Ok(Self { segments })
    }
}

impl fmt::Display for SpecPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.segments.is_empty() {
            return f.write_str("/");
        }
        for segment in &self.segments {
            write!(f, "/{segment}")?;
        }
        Ok(())
    }
}

impl Serialize for SpecPath {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SpecPath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// The unique node addressed by a path: its concrete location (indices
/// only, no id references) and a copy of its value.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeHandle {
    pub path: SpecPath,
    pub value: Value,
}

pub fn resolve_path(doc: &SpecDocument, path: &SpecPath) -> Result<NodeHandle, PathError> {
    let root = serde_json::to_value(doc).expect("spec documents always serialize");
    let concrete = concretize(&root, path)?;
    let value = get(&root, &concrete)
        .cloned()
        .ok_or_else(|| PathError::NotFound(path.to_string()))?;
    Ok(NodeHandle {
        path: concrete,
        value,
    })
}

/// Rewrites id references into indices by walking `root`.
pub(crate) fn concretize(root: &Value, path: &SpecPath) -> Result<SpecPath, PathError> {
    let not_found = || PathError::NotFound(path.to_string());
    let mut node = root;
    let mut out = SpecPath::root();
    for segment in path.segments() {
        match (segment, node) {
            (PathSegment::Field(name), Value::Object(map)) => {
                node = map.get(name).ok_or_else(not_found)?;
                out.segments.push(segment.clone());
            }
            (PathSegment::Index(i), Value::Array(items)) => {
                node = items.get(*i).ok_or_else(not_found)?;
                out.segments.push(segment.clone());
            }
            (PathSegment::Id(id), Value::Array(items)) => {
                let mut hits = items
                    .iter()
                    .enumerate()
                    .filter(|(_, item)| item.get("id").and_then(Value::as_str) == Some(id));
                let (i, item) = hits.next().ok_or_else(not_found)?;
                if hits.next().is_some() {
                    return Err(PathError::Ambiguous(path.to_string()));
                }
                node = item;
                out.segments.push(PathSegment::Index(i));
            }
            _ => return Err(not_found()),
        }
    }
    Ok(out)
}

pub(crate) fn get<'a>(root: &'a Value, concrete: &SpecPath) -> Option<&'a Value> {
    concrete
        .segments()
        .iter()
        .try_fold(root, |node, segment| match (segment, node) {
            (PathSegment::Field(name), Value::Object(map)) => map.get(name),
            (PathSegment::Index(i), Value::Array(items)) => items.get(*i),
            _ => None,
        })
}

pub(crate) fn get_mut<'a>(root: &'a mut Value, concrete: &SpecPath) -> Option<&'a mut Value> {
    concrete
        .segments()
        .iter()
        .try_fold(root, |node, segment| match (segment, node) {
            (PathSegment::Field(name), Value::Object(map)) => map.get_mut(name),
            (PathSegment::Index(i), Value::Array(items)) => items.get_mut(*i),
            _ => None,
        })
}
