use std::sync::OnceLock;

use regex::Regex;

use super::GlobalDesignProfile;
use crate::spec::{
    is_canonical_hex, ColorToken, Fraction, GlobalSpecification, LayoutSpec, SectionSpec,
    ShapeSpec, SpecDocument, DEFAULT_CORNER_RADIUS_PX, DEFAULT_GRID_COLUMNS, DEFAULT_SPACING_PX,
};

fn number_after(re: &Regex, text: &str) -> Option<u32> {
    let caps = re.captures(text)?;
    caps.iter()
        .skip(1)
        .flatten()
        .find_map(|m| m.as_str().parse().ok())
}

fn columns_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\b(\d{1,3})[\s-]*col(?:umn)?s?\b|\bcol(?:umn)?s?\s*[=:]\s*(\d{1,3})")
            .unwrap()
    })
}

fn spacing_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)(?:spacing|gap|gutter)[^0-9]{0,16}(\d{1,3})\s*px|(\d{1,3})\s*px\s*(?:spacing|gaps?|gutters?)").unwrap()
    })
}

fn radius_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)(?:radius|corners?)[^0-9]{0,16}(\d{1,3})\s*px|(\d{1,3})\s*px\s*(?:radius|corners?|rounded)").unwrap()
    })
}

/// Grid statement in free text, e.g. "12-column grid, 8px gutters" or
/// "Grid(col=12, spacing=8px)". Missing parts fall back to 12 columns / 8px.
pub(crate) fn parse_grid(text: &str) -> (u32, u32) {
    let columns = number_after(columns_re(), text)
        .filter(|c| *c > 0)
        .unwrap_or(DEFAULT_GRID_COLUMNS);
    let spacing = number_after(spacing_re(), text).unwrap_or(DEFAULT_SPACING_PX);
    (columns, spacing)
}

/// Builds the document from the page profile and the per-region sections.
///
/// Region colors become palette roles (unseen hexes get `Extra-<k>` roles,
/// unknown role names are dropped), section grids snap to the page grid, and
/// ids are re-sequenced in region order.
pub fn integrate(
    profile: &GlobalDesignProfile,
    rsus: &[SectionSpec],
    page_goal: &str,
) -> SpecDocument {
    let (grid_columns, spacing_px) = parse_grid(&profile.layout_rhythm);
    let corner_radius_px =
        number_after(radius_re(), &profile.tone).unwrap_or(DEFAULT_CORNER_RADIUS_PX);
    let non_empty = |s: &str| (!s.is_empty()).then(|| s.to_string()).into_iter().collect();

    let mut palette = Palette {
        colors: profile.palette.clone(),
        extras: 0,
    };
    let sections = rsus
        .iter()
        .enumerate()
        .map(|(i, rsu)| {
            let id = format!("sec-{}", i + 1);
            let mut section = rsu.clone();
            section.colors = palette.roles_for(&rsu.colors);
            section.layout.grid_cols = largest_divisor_at_most(grid_columns, rsu.layout.grid_cols);
            section.layout.grid_rows = rsu.layout.grid_rows.max(1);
            section.layout.spacing_px = snap_spacing(rsu.layout.spacing_px, spacing_px);
            if !section.pos.fraction.is_valid() {
                section.pos.fraction =
                    Fraction::from_units(section.pos.fraction.units().clamp(1, Fraction::SCALE));
            }
            for (j, comp) in section.components.iter_mut().enumerate() {
                comp.id = format!("{id}-c{}", j + 1);
                comp.colors = palette.roles_for(&comp.colors);
            }
            section.id = id;
            section
        })
        .collect();

    SpecDocument {
        page_goal: page_goal.to_string(),
        global: GlobalSpecification {
            layout: LayoutSpec {
                grid_columns,
                spacing_px,
                semantic: non_empty(&profile.layout_rhythm),
            },
            colors: palette.colors,
            shape: ShapeSpec {
                corner_radius_px,
                semantic: non_empty(&profile.tone),
            },
            scenario: Vec::new(),
        },
        sections,
    }
}

struct Palette {
    colors: Vec<ColorToken>,
    extras: usize,
}

impl Palette {
    fn roles_for(&mut self, refs: &[String]) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in refs {
            let role = if is_canonical_hex(r) {
                Some(self.role_for_hex(r))
            } else {
                self.colors.iter().any(|c| &c.role == r).then(|| r.clone())
            };
            if let Some(role) = role {
                if !out.contains(&role) {
                    out.push(role);
                }
            }
        }
        out
    }

    fn role_for_hex(&mut self, hex: &str) -> String {
        if let Some(c) = self.colors.iter().find(|c| c.hex == hex) {
            return c.role.clone();
        }
        let role = loop {
            self.extras += 1;
            let candidate = format!("Extra-{}", self.extras);
            if !self.colors.iter().any(|c| c.role == candidate) {
                break candidate;
            }
        };
        self.colors.push(ColorToken::new(hex, role.clone()));
        role
    }
}

fn largest_divisor_at_most(n: u32, limit: u32) -> u32 {
    (1..=limit.clamp(1, n.max(1)))
        .rev()
        .find(|d| n.is_multiple_of(*d))
        .unwrap_or(1)
}

fn snap_spacing(spacing: u32, page: u32) -> u32 {
    if page == 0 {
        return 0;
    }
    let multiple = ((f64::from(spacing) / f64::from(page)).round() as u32).max(1);
    multiple * page
}
