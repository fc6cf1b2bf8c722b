//! The two-level UI specification: a global specification (layout, colors,
//! shape language, usage scenario) plus the page composition of sections and
//! components.
//!
//! Every type here is a plain immutable value. The canonical JSON form is
//! produced by [`serialize_spec`] and read back by [`parse_spec`]; field
//! declaration order below *is* the canonical key order, so do not reorder
//! fields.

mod canonical;
mod diff;
mod path;
mod vocab;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use canonical::{parse_spec, serialize_spec, ParseError};
pub use diff::spec_diff;
pub use path::{resolve_path, NodeHandle, PathError, PathSegment, SpecPath};
pub use vocab::ComponentVocabulary;

pub(crate) use canonical::check_constraints as canonical_check;

pub(crate) mod path_internals {
    pub(crate) use super::path::{concretize, get_mut};
}

/// A complete single-page specification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub page_goal: String,
    pub global: GlobalSpecification,
    pub sections: Vec<SectionSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalSpecification {
    pub layout: LayoutSpec,
    pub colors: Vec<ColorToken>,
    pub shape: ShapeSpec,
    pub scenario: Vec<String>,
}

/// Page-level grid plus semantic organization labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSpec {
    pub grid_columns: u32,
    pub spacing_px: u32,
    pub semantic: Vec<String>,
}

/// A palette entry. Sections and components reference colors by `role`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColorToken {
    pub hex: String,
    pub role: String,
}

impl ColorToken {
    pub fn new(hex: impl Into<String>, role: impl Into<String>) -> Self {
        Self {
            hex: hex.into(),
            role: role.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSpec {
    pub corner_radius_px: u32,
    pub semantic: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSpec {
    pub id: String,
    pub pos: PositionSpec,
    pub layout: SectionLayout,
    pub colors: Vec<String>,
    pub components: Vec<ComponentSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionSpec {
    pub anchor: Anchor,
    pub fraction: Fraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    Left,
    Right,
    Top,
    Bottom,
    Center,
    Full,
}

impl Anchor {
    pub const ALL: [Anchor; 6] = [
        Anchor::Left,
        Anchor::Right,
        Anchor::Top,
        Anchor::Bottom,
        Anchor::Center,
        Anchor::Full,
    ];
}

/// `m x n` grid with a base spacing, used by both sections and components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionLayout {
    pub grid_rows: u32,
    pub grid_cols: u32,
    pub spacing_px: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    #[serde(rename = "type")]
    pub kind: String,
    pub id: String,
    pub func: String,
    pub layout: SectionLayout,
    pub colors: Vec<String>,
}

/// Proportional share stored in ten-thousandths, so the canonical form never
/// carries more than four fractional digits.
///
/// Valid values are in `(0, 1]`, i.e. `1..=10_000` units. Out-of-range values
/// can be constructed (programmatic documents) and are reported by validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fraction(u32);

impl Fraction {
    pub const SCALE: u32 = 10_000;
    pub const ONE: Fraction = Fraction(Self::SCALE);

    pub const fn from_units(units: u32) -> Self {
        Fraction(units)
    }

    pub const fn units(self) -> u32 {
        self.0
    }

    /// Rounds to the nearest ten-thousandth; negative input saturates to zero.
    pub fn from_f64_rounded(value: f64) -> Self {
        let scaled = (value * f64::from(Self::SCALE)).round();
        if scaled.is_nan() || scaled <= 0.0 {
            Fraction(0)
        } else if scaled >= f64::from(u32::MAX) {
            Fraction(u32::MAX)
        } else {
            Fraction(scaled as u32)
        }
    }

    /// Exact conversion: fails if `value` has more than four fractional digits.
    pub fn from_f64_exact(value: f64) -> Option<Self> {
        let scaled = value * f64::from(Self::SCALE);
        let rounded = scaled.round();
        if !scaled.is_finite() || (scaled - rounded).abs() > 1e-6 || rounded < 0.0 {
            return None;
        }
        if rounded > f64::from(u32::MAX) {
            return None;
        }
        Some(Fraction(rounded as u32))
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / f64::from(Self::SCALE)
    }

    pub fn is_valid(self) -> bool {
        self.0 > 0 && self.0 <= Self::SCALE
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        // n / 10^4 as f64 has a shortest round-trip form equal to the decimal
        // itself, so serde_json emits e.g. `0.2` or `0.3333`.
        serializer.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = f64::deserialize(deserializer)?;
        Fraction::from_f64_exact(value).ok_or_else(|| {
            serde::de::Error::custom(format!(
                "fraction {value} must be a non-negative decimal with at most 4 fractional digits"
            ))
        })
    }
}

/// `#RRGGBB` with uppercase hex digits.
pub fn is_canonical_hex(hex: &str) -> bool {
    let bytes = hex.as_bytes();
    bytes.len() == 7
        && bytes[0] == b'#'
        && bytes[1..]
            .iter()
            .all(|b| b.is_ascii_digit() || (b'A'..=b'F').contains(b))
}

/// Uppercases a `#rrggbb` color; returns `None` when it is not a six-digit hex.
pub fn normalize_hex(hex: &str) -> Option<String> {
    let trimmed = hex.trim();
    let upper = trimmed.to_ascii_uppercase();
    is_canonical_hex(&upper).then_some(upper)
}

/// Ids must be addressable with a `#<id>` path segment.
pub fn is_addressable_id(id: &str) -> bool {
    !id.is_empty() && !id.contains('/') && !id.chars().any(char::is_whitespace)
}

/// The default page grid used whenever nothing better is known.
pub const DEFAULT_GRID_COLUMNS: u32 = 12;
pub const DEFAULT_SPACING_PX: u32 = 8;
pub const DEFAULT_CORNER_RADIUS_PX: u32 = 8;

impl Default for GlobalSpecification {
    fn default() -> Self {
        Self {
            layout: LayoutSpec {
                grid_columns: DEFAULT_GRID_COLUMNS,
                spacing_px: DEFAULT_SPACING_PX,
                semantic: Vec::new(),
            },
            colors: Vec::new(),
            shape: ShapeSpec {
                corner_radius_px: DEFAULT_CORNER_RADIUS_PX,
                semantic: Vec::new(),
            },
            scenario: Vec::new(),
        }
    }
}

impl SpecDocument {
    /// An empty page with the default global specification.
    pub fn empty(page_goal: impl Into<String>) -> Self {
        Self {
            page_goal: page_goal.into(),
            global: GlobalSpecification::default(),
            sections: Vec::new(),
        }
    }

    pub fn section(&self, id: &str) -> Option<&SectionSpec> {
        self.sections.iter().find(|s| s.id == id)
    }

    /// Every section and component id in document order.
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().flat_map(|s| {
            std::iter::once(s.id.as_str()).chain(s.components.iter().map(|c| c.id.as_str()))
        })
    }

    pub fn components(&self) -> impl Iterator<Item = &ComponentSpec> {
        self.sections.iter().flat_map(|s| s.components.iter())
    }

    pub fn palette_role(&self, role: &str) -> Option<&ColorToken> {
        self.global.colors.iter().find(|c| c.role == role)
    }
}
