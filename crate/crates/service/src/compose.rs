//! Assembling a page from pieces of extracted reference documents.
//!
//! Selections apply in order. A selection under `/global` copies that subtree
//! into the same place of the new document, so a later selection of the same
//! field wins; a single list element (e.g. one palette token) is appended,
//! replacing a token with the same role. A section selection appends the
//! section. A component selection appends the component to a copy of its
//! parent section, shared by all components picked from that parent. Ids
//! that collide are renamed to the next free `sec-N` / `<section>-cN`.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;
use uispec::spec::{
    parse_spec, resolve_path, serialize_spec, PathSegment, SectionSpec, SpecDocument, SpecPath,
};
use uispec::validate::{validate, ValidationReport};

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Selection {
    pub ref_id: String,
    pub path: SpecPath,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComposeRequest {
    #[serde(default)]
    pub selections: Vec<Selection>,
    #[serde(default)]
    pub page_goal: String,
    /// Merged into `global` after the selections; objects merge key by key,
    /// anything else replaces.
    #[serde(default)]
    pub overrides: Option<Value>,
}

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("unknown reference {0}")]
    UnknownReference(String),
    #[error("{path} does not resolve in {ref_id}: {reason}")]
    PathNotFound {
        ref_id: String,
        path: String,
        reason: String,
    },
    #[error("cannot compose from {0}: select a global field, a section or a component")]
    Unsupported(String),
    #[error("composed document is malformed: {0}")]
    Malformed(String),
    #[error("composed document fails validation")]
    Invalid(ValidationReport),
}

enum Target {
    Global(Vec<PathSegment>),
    Section(usize),
    Component(usize, usize),
}

fn classify(path: &SpecPath) -> Option<Target> {
    use PathSegment::{Field, Index};
    match path.segments() {
        [Field(g), rest @ ..] if g == "global" => Some(Target::Global(rest.to_vec())),
        [Field(s), Index(i)] if s == "sections" => Some(Target::Section(*i)),
        [Field(s), Index(i), Field(c), Index(j)] if s == "sections" && c == "components" => {
            Some(Target::Component(*i, *j))
        }
        _ => None,
    }
}

fn merge(into: &mut Value, patch: &Value) {
    match (into, patch) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, v) in b {
                match a.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        a.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

fn place_global(global: &mut Value, rest: &[PathSegment], value: Value) -> Result<(), String> {
    let Some((last, parents)) = rest.split_last() else {
        *global = value;
        return Ok(());
    };
    let mut node = global;
    for seg in parents {
        node = match seg {
            PathSegment::Field(f) => node.get_mut(f.as_str()),
            PathSegment::Index(i) => node.get_mut(*i),
            _ => None,
        }
        .ok_or("parent missing")?;
    }
    match last {
        PathSegment::Field(f) => {
            node.as_object_mut()
                .ok_or("not an object")?
                .insert(f.clone(), value);
        }
        PathSegment::Index(_) => {
            let items = node.as_array_mut().ok_or("not a list")?;
            let role = value.get("role").cloned();
            match items
                .iter()
                .position(|v| role.is_some() && v.get("role") == role.as_ref())
            {
                Some(at) => items[at] = value,
                None => items.push(value),
            }
        }
        _ => return Err("unsupported segment".into()),
    }
    Ok(())
}

struct Ids {
    used: HashSet<String>,
}

impl Ids {
    fn free(&self, candidate: &str, fallback: impl Fn(usize) -> String) -> String {
        if !self.used.contains(candidate) {
            return candidate.to_string();
        }
        (1..)
            .map(fallback)
            .find(|c| !self.used.contains(c))
            .expect("unbounded")
    }

    /// Renames the section and its components where they collide.
    fn admit(&mut self, mut section: SectionSpec) -> SectionSpec {
        let old = section.id.clone();
        section.id = self.free(&old, |n| format!("sec-{n}"));
        self.used.insert(section.id.clone());
        let renamed = section.id != old;
        for c in &mut section.components {
            if renamed {
                if let Some(tail) = c.id.strip_prefix(&format!("{old}-")) {
                    c.id = format!("{}-{tail}", section.id);
                }
            }
            let sid = section.id.clone();
            c.id = self.free(&c.id, |n| format!("{sid}-c{n}"));
            self.used.insert(c.id.clone());
        }
        section
    }

    fn admit_component(
        &mut self,
        section: &mut SectionSpec,
        mut comp: uispec::spec::ComponentSpec,
    ) {
        let sid = section.id.clone();
        comp.id = self.free(&comp.id, |n| format!("{sid}-c{n}"));
        self.used.insert(comp.id.clone());
        section.components.push(comp);
    }
}

/// Builds and validates the composed document.
pub fn compose(
    references: &BTreeMap<String, SpecDocument>,
    request: &ComposeRequest,
) -> Result<SpecDocument, ComposeError> {
    let mut doc = SpecDocument::empty(request.page_goal.clone());
    let mut global = serde_json::to_value(&doc.global).expect("globals serialize");
    let mut ids = Ids {
        used: HashSet::new(),
    };
    let mut wrappers: HashMap<(String, usize), usize> = HashMap::new();

    for sel in &request.selections {
        let source = references
            .get(&sel.ref_id)
            .ok_or_else(|| ComposeError::UnknownReference(sel.ref_id.clone()))?;
        let node = resolve_path(source, &sel.path).map_err(|e| ComposeError::PathNotFound {
            ref_id: sel.ref_id.clone(),
            path: sel.path.to_string(),
            reason: e.to_string(),
        })?;
        match classify(&node.path) {
            Some(Target::Global(rest)) => {
                place_global(&mut global, &rest, node.value).map_err(|reason| {
                    ComposeError::PathNotFound {
                        ref_id: sel.ref_id.clone(),
                        path: sel.path.to_string(),
                        reason,
                    }
                })?;
            }
            Some(Target::Section(i)) => {
                let section = ids.admit(source.sections[i].clone());
                doc.sections.push(section);
            }
            Some(Target::Component(i, j)) => {
                let comp = source.sections[i].components[j].clone();
                let key = (sel.ref_id.clone(), i);
                match wrappers.get(&key) {
                    Some(&at) => ids.admit_component(&mut doc.sections[at], comp),
                    None => {
                        let mut wrapper = source.sections[i].clone();
                        wrapper.components.clear();
                        let mut wrapper = ids.admit(wrapper);
                        ids.admit_component(&mut wrapper, comp);
                        wrappers.insert(key, doc.sections.len());
                        doc.sections.push(wrapper);
                    }
                }
            }
            None => return Err(ComposeError::Unsupported(sel.path.to_string())),
        }
    }
    if let Some(patch) = &request.overrides {
        merge(&mut global, patch);
    }
    doc.global =
        serde_json::from_value(global).map_err(|e| ComposeError::Malformed(e.to_string()))?;
    // The strict parser enforces the schema invariants (hex form, unique roles).
    let doc =
        parse_spec(&serialize_spec(&doc)).map_err(|e| ComposeError::Malformed(e.to_string()))?;
    let report = validate(&doc);
    if !report.ok {
        return Err(ComposeError::Invalid(report));
    }
    Ok(doc)
}
