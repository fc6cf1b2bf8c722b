//! Structural checks and the global-to-section inheritance constraint.
//!
//! Inheritance is decided as follows:
//!
//! * layout: a section's `grid_cols` divides the page `grid_columns`, and its
//!   `spacing_px` is a positive multiple of the page spacing (when the page
//!   spacing is 0, only 0 passes);
//! * color: every role referenced by a section or one of its components is a
//!   role of the global palette;
//! * shape: sections and components carry no shape of their own, so they
//!   always inherit the page shape and the check is vacuous.
//!
//! Problems are reported, never thrown; every violation carries a path that
//! resolves in the checked document.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::spec::{
    is_addressable_id, ComponentSpec, ComponentVocabulary, GlobalSpecification, SectionSpec,
    SpecDocument, SpecPath,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationCode {
    LayoutNotSpecialization,
    ColorNotInPalette,
    ShapeNotSpecialization,
    DuplicateId,
    UnknownComponentType,
    DanglingColorRole,
    EmptyPalette,
    BadFraction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub path: SpecPath,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            ok: violations.is_empty(),
            violations,
        }
    }
}

pub fn validate(doc: &SpecDocument) -> ValidationReport {
    validate_with(doc, &ComponentVocabulary::default())
}

pub fn validate_with(doc: &SpecDocument, vocab: &ComponentVocabulary) -> ValidationReport {
    let mut out = Vec::new();
    let global = &doc.global;

    if global.layout.grid_columns == 0 {
        out.push(Violation {
            code: ViolationCode::LayoutNotSpecialization,
            path: SpecPath::root()
                .field("global")
                .field("layout")
                .field("grid_columns"),
            message: "page grid must have at least one column".into(),
        });
    }

    let references_color = doc
        .sections
        .iter()
        .any(|s| !s.colors.is_empty() || s.components.iter().any(|c| !c.colors.is_empty()));
    if global.colors.is_empty() && references_color {
        out.push(Violation {
            code: ViolationCode::EmptyPalette,
            path: SpecPath::root().field("global").field("colors"),
            message: "color roles are referenced but the global palette is empty".into(),
        });
    }

    let mut id_counts: HashMap<&str, usize> = HashMap::new();
    for id in doc.ids() {
        *id_counts.entry(id).or_default() += 1;
    }
    let addressable = |id: &str| is_addressable_id(id) && id_counts.get(id) == Some(&1);
    let mut seen: HashMap<&str, ()> = HashMap::new();

    for (si, section) in doc.sections.iter().enumerate() {
        let base = if addressable(&section.id) {
            SpecPath::section(&section.id)
        } else {
            SpecPath::root().field("sections").index(si)
        };
        if seen.insert(section.id.as_str(), ()).is_some() {
            out.push(duplicate(
                &section.id,
                SpecPath::root().field("sections").index(si),
            ));
        }
        if !section.pos.fraction.is_valid() {
            out.push(Violation {
                code: ViolationCode::BadFraction,
                path: base.clone().field("pos").field("fraction"),
                message: format!("fraction {} is outside (0, 1]", section.pos.fraction),
            });
        }
        section_inheritance(section, global, &base, &addressable, &mut out);

        for (ci, comp) in section.components.iter().enumerate() {
            let cbase = if addressable(&comp.id) {
                base.clone().field("components").id(&comp.id)
            } else {
                base.clone().field("components").index(ci)
            };
            if seen.insert(comp.id.as_str(), ()).is_some() {
                out.push(duplicate(
                    &comp.id,
                    base.clone().field("components").index(ci),
                ));
            }
            if !vocab.contains(&comp.kind) {
                out.push(Violation {
                    code: ViolationCode::UnknownComponentType,
                    path: cbase.field("type"),
                    message: format!("component type {:?} is not in the vocabulary", comp.kind),
                });
            }
        }
    }

    ValidationReport::from_violations(out)
}

/// Inheritance violations for one section (and its components) against the
/// global specification. Paths are rooted at `/sections/#<id>`.
pub fn check_inheritance(section: &SectionSpec, global: &GlobalSpecification) -> Vec<Violation> {
    let mut out = Vec::new();
    let ids: Vec<&str> = section.components.iter().map(|c| c.id.as_str()).collect();
    let addressable =
        |id: &str| is_addressable_id(id) && ids.iter().filter(|i| **i == id).count() == 1;
    section_inheritance(
        section,
        global,
        &SpecPath::section(&section.id),
        &addressable,
        &mut out,
    );
    out
}

fn section_inheritance(
    section: &SectionSpec,
    global: &GlobalSpecification,
    base: &SpecPath,
    addressable: &dyn Fn(&str) -> bool,
    out: &mut Vec<Violation>,
) {
    let layout = base.clone().field("layout");
    let page_cols = global.layout.grid_columns;
    let cols = section.layout.grid_cols;
    if cols == 0 || !page_cols.is_multiple_of(cols) {
        out.push(Violation {
            code: ViolationCode::LayoutNotSpecialization,
            path: layout.clone().field("grid_cols"),
            message: format!("{cols} columns do not divide the {page_cols}-column page grid"),
        });
    }
    if section.layout.grid_rows == 0 {
        out.push(Violation {
            code: ViolationCode::LayoutNotSpecialization,
            path: layout.clone().field("grid_rows"),
            message: "section grid must have at least one row".into(),
        });
    }
    let page_spacing = global.layout.spacing_px;
    let spacing = section.layout.spacing_px;
    if !spacing_specializes(spacing, page_spacing) {
        out.push(Violation {
            code: ViolationCode::LayoutNotSpecialization,
            path: layout.field("spacing_px"),
            message: format!(
                "spacing {spacing}px is not a positive multiple of the page spacing {page_spacing}px"
            ),
        });
    }

    for (i, role) in section.colors.iter().enumerate() {
        if !in_palette(global, role) {
            out.push(Violation {
                code: ViolationCode::ColorNotInPalette,
                path: base.clone().field("colors").index(i),
                message: format!("color role {role:?} is not in the global palette"),
            });
        }
    }
    for (ci, comp) in section.components.iter().enumerate() {
        component_colors(comp, ci, global, base, addressable(&comp.id), out);
    }
}

fn component_colors(
    comp: &ComponentSpec,
    index: usize,
    global: &GlobalSpecification,
    section_base: &SpecPath,
    addressable: bool,
    out: &mut Vec<Violation>,
) {
    let components = section_base.clone().field("components");
    let cbase = if addressable {
        components.id(&comp.id)
    } else {
        components.index(index)
    };
    for (i, role) in comp.colors.iter().enumerate() {
        if !in_palette(global, role) {
            out.push(Violation {
                code: ViolationCode::DanglingColorRole,
                path: cbase.clone().field("colors").index(i),
                message: format!("component color role {role:?} does not resolve in the palette"),
            });
        }
    }
}

fn spacing_specializes(spacing: u32, page_spacing: u32) -> bool {
    if page_spacing == 0 {
        spacing == 0
    } else {
        spacing > 0 && spacing.is_multiple_of(page_spacing)
    }
}

fn in_palette(global: &GlobalSpecification, role: &str) -> bool {
    global.colors.iter().any(|c| c.role == role)
}

fn duplicate(id: &str, path: SpecPath) -> Violation {
    Violation {
        code: ViolationCode::DuplicateId,
        path,
        message: format!("id {id:?} is used more than once"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{resolve_path, Anchor, ColorToken, Fraction, PositionSpec, SectionLayout};

    fn section(id: &str, cols: u32, spacing: u32) -> SectionSpec {
        SectionSpec {
            id: id.into(),
            pos: PositionSpec {
                anchor: Anchor::Top,
                fraction: Fraction::from_units(5000),
            },
            layout: SectionLayout {
                grid_rows: 1,
                grid_cols: cols,
                spacing_px: spacing,
            },
            colors: vec![],
            components: vec![],
        }
    }

    fn doc_with(sections: Vec<SectionSpec>) -> SpecDocument {
        let mut d = SpecDocument::empty("dashboard");
        d.global.colors.push(ColorToken::new("#CF9BDE", "Accent"));
        d.sections = sections;
        d
    }

    #[test]
    fn three_columns_under_twelve_is_ok() {
        let report = validate(&doc_with(vec![section("sec-1", 3, 8)]));
        assert!(report.ok, "{report:?}");
    }

    #[test]
    fn unknown_role_is_reported_at_colors_path() {
        let mut s = section("sec-1", 3, 8);
        s.colors.push("Neon".into());
        let d = doc_with(vec![s]);
        let report = validate(&d);
        assert_eq!(report.violations.len(), 1);
        let v = &report.violations[0];
        assert_eq!(v.code, ViolationCode::ColorNotInPalette);
        assert_eq!(v.path.to_string(), "/sections/#sec-1/colors/0");
        assert!(resolve_path(&d, &v.path).is_ok());
    }

    #[test]
    fn divisibility_matches_enumeration() {
        // a column count specializes a 12-column grid iff some k in 1..=12 has k*cols == 12
        for cols in 1..=12u32 {
            let divides = (1..=12u32).any(|k| k * cols == 12);
            let report = validate(&doc_with(vec![section("s", cols, 8)]));
            assert_eq!(report.ok, divides, "cols={cols}");
            if !divides {
                assert_eq!(report.violations.len(), 1);
                assert_eq!(
                    report.violations[0].code,
                    ViolationCode::LayoutNotSpecialization
                );
            }
        }
    }

    #[test]
    fn inheritance_cases() {
        let global = doc_with(vec![]).global;
        assert!(check_inheritance(&section("s", 4, 8), &global).is_empty());
        let v = check_inheritance(&section("s", 4, 12), &global);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code, ViolationCode::LayoutNotSpecialization);
        assert_eq!(v[0].path.to_string(), "/sections/#s/layout/spacing_px");
        assert!(check_inheritance(&section("s", 4, 16), &global).is_empty());
        assert_eq!(check_inheritance(&section("s", 4, 0), &global).len(), 1);
    }

    #[test]
    fn zero_page_spacing_accepts_only_zero() {
        let mut d = doc_with(vec![section("a", 1, 0), section("b", 1, 8)]);
        d.global.layout.spacing_px = 0;
        let report = validate(&d);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(
            report.violations[0].path.to_string(),
            "/sections/#b/layout/spacing_px"
        );
    }

    #[test]
    fn structural_checks_use_resolvable_paths() {
        let mut a = section("dup", 3, 8);
        a.components.push(ComponentSpec {
            kind: "Sparkle".into(),
            id: "c1".into(),
            func: "decor".into(),
            layout: SectionLayout {
                grid_rows: 1,
                grid_cols: 1,
                spacing_px: 8,
            },
            colors: vec!["Ghost".into()],
        });
        let mut b = section("dup", 3, 8);
        b.pos.fraction = Fraction::from_units(0);
        let mut d = doc_with(vec![a, b]);
        d.global.colors.clear();
        let report = validate(&d);
        let codes: Vec<_> = report.violations.iter().map(|v| v.code).collect();
        assert!(!report.ok);
        for code in [
            ViolationCode::EmptyPalette,
            ViolationCode::DuplicateId,
            ViolationCode::BadFraction,
            ViolationCode::UnknownComponentType,
            ViolationCode::DanglingColorRole,
        ] {
            assert!(codes.contains(&code), "missing {code:?} in {codes:?}");
        }
        for v in &report.violations {
            assert!(
                resolve_path(&d, &v.path).is_ok(),
                "{} does not resolve",
                v.path
            );
        }
    }

    #[test]
    fn report_json_shape() {
        let mut s = section("sec-1", 5, 8);
        s.colors.push("Neon".into());
        let report = validate(&doc_with(vec![s]));
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["ok"], false);
        assert_eq!(json["violations"][0]["code"], "LayoutNotSpecialization");
        assert_eq!(
            json["violations"][0]["path"],
            "/sections/#sec-1/layout/grid_cols"
        );
        assert!(json["violations"][0]["message"].is_string());
    }

    #[test]
    fn removing_a_section_keeps_ok_document_ok() {
        let d = doc_with(vec![section("a", 3, 8), section("b", 6, 16)]);
        assert!(validate(&d).ok);
        let mut smaller = d.clone();
        smaller.sections.remove(0);
        assert!(validate(&smaller).ok);
    }
}
