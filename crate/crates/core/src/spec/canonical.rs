use std::collections::HashSet;

use serde_json::error::Category;
use thiserror::Error;

use super::{is_addressable_id, is_canonical_hex, SectionLayout, SpecDocument};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("constraint error: {0}")]
    Constraint(String),
}

/// Parses a document in the SPEC JSON format.
///
/// Unknown and duplicate keys are rejected. After the schema check the type
/// invariants are enforced: unique addressable ids, unique palette roles,
/// canonical hex colors, positive grid dimensions and fractions in `(0, 1]`.
pub fn parse_spec(input: &str) -> Result<SpecDocument, ParseError> {
    let doc: SpecDocument = serde_json::from_str(input).map_err(|e| match e.classify() {
        Category::Syntax | Category::Eof | Category::Io => ParseError::Syntax(e.to_string()),
        Category::Data => ParseError::Schema(e.to_string()),
    })?;
    check_constraints(&doc).map_err(ParseError::Constraint)?;
    Ok(doc)
}

/// Canonical compact form: schema key order, document list order, no
/// whitespace. Equal documents give byte-identical output.
pub fn serialize_spec(doc: &SpecDocument) -> String {
    // Struct serialization over plain strings and integers cannot fail.
    serde_json::to_string(doc).expect("spec documents always serialize")
}

/// Type invariants shared by parsing and edit application.
pub(crate) fn check_constraints(doc: &SpecDocument) -> Result<(), String> {
    let g = &doc.global;
    if g.layout.grid_columns == 0 {
        return Err("global.layout.grid_columns must be at least 1".into());
    }
    let mut roles = HashSet::new();
    for (i, token) in g.colors.iter().enumerate() {
        if !is_canonical_hex(&token.hex) {
            return Err(format!(
                "global.colors[{i}].hex {:?} is not of the form #RRGGBB (uppercase)",
                token.hex
            ));
        }
        if !roles.insert(token.role.as_str()) {
            return Err(format!("duplicate color role {:?}", token.role));
        }
    }

    let mut ids = HashSet::new();
    let mut check_id = |id: &str| -> Result<(), String> {
        if !is_addressable_id(id) {
            return Err(format!(
                "id {id:?} must be non-empty and contain no '/' or whitespace"
            ));
        }
        if !ids.insert(id.to_string()) {
            return Err(format!("duplicate id {id:?}"));
        }
        Ok(())
    };
    for (si, section) in doc.sections.iter().enumerate() {
        check_id(&section.id)?;
        if !section.pos.fraction.is_valid() {
            return Err(format!(
                "sections[{si}].pos.fraction {} must be in (0, 1]",
                section.pos.fraction
            ));
        }
        check_grid(&section.layout, &format!("sections[{si}].layout"))?;
        for (ci, comp) in section.components.iter().enumerate() {
            check_id(&comp.id)?;
            check_grid(
                &comp.layout,
                &format!("sections[{si}].components[{ci}].layout"),
            )?;
        }
    }
    Ok(())
}

fn check_grid(layout: &SectionLayout, at: &str) -> Result<(), String> {
    if layout.grid_rows == 0 || layout.grid_cols == 0 {
        return Err(format!("{at} grid must be at least 1x1"));
    }
    Ok(())
}
