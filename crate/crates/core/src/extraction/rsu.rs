use image::RgbImage;
use serde::Deserialize;

use super::regions::derive_position;
use super::{encode_png, ExtractionError, RegionBox};
use crate::client::{extract_json_payload, ModelClient, ModelRequest, Task};
use crate::spec::{
    normalize_hex, ComponentSpec, ComponentVocabulary, SectionLayout, SectionSpec,
    DEFAULT_SPACING_PX,
};

/// Where a region sits: its order on the page and its page geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionHint {
    /// Zero-based region order; the section id is `sec-<index + 1>`.
    pub index: usize,
    pub bbox: RegionBox,
    pub page_width: u32,
    pub page_height: u32,
}

impl RegionHint {
    pub fn section_id(&self) -> String {
        format!("sec-{}", self.index + 1)
    }
}

const REGION_PROMPT: &str = "\
## task: region-extraction
You are given one cropped region of a UI screenshot. Describe it as a Region
SPEC Unit. Reason step by step: first name the section's role on the page,
then enumerate its components in reading order, then encode the attributes:
an m x n grid with base spacing, the hex colors in use, and for each
component its type, its function, and its own grid.
Write your reasoning first, then the RSU as one JSON object in a fenced block.

### Example
Region: a product card.
Reasoning: the block is a single card. Top to bottom it holds a photo, a
product name, a price, and a call-to-action button: four components stacked
in one column. The background is white and the button and price use an
orange accent.
```json
{\"section\":\"product card\",\"layout\":{\"grid_rows\":4,\"grid_cols\":1,\"spacing_px\":8},
 \"colors\":[\"#FFFFFF\",\"#FF6600\"],
 \"components\":[
  {\"type\":\"Image\",\"func\":\"product photo\"},
  {\"type\":\"Title\",\"func\":\"product name\"},
  {\"type\":\"PriceLabel\",\"func\":\"price\",\"colors\":[\"#FF6600\"]},
  {\"type\":\"Button\",\"func\":\"add to cart\",\"colors\":[\"#FF6600\"]}]}
```
";

fn region_prompt(hint: &RegionHint, vocab: &ComponentVocabulary) -> String {
    let b = &hint.bbox;
    let types: Vec<&str> = vocab.iter().collect();
    format!(
        "{REGION_PROMPT}\n### Region\npage: {}x{}\nregion: {} bbox: {},{},{},{}\nallowed types: {}\n\n### Reasoning\n",
        hint.page_width,
        hint.page_height,
        hint.index + 1,
        b.x,
        b.y,
        b.w,
        b.h,
        types.join(", ")
    )
}

#[derive(Deserialize)]
struct RsuWire {
    #[serde(default)]
    layout: Option<GridWire>,
    #[serde(default)]
    colors: Vec<String>,
    #[serde(default)]
    components: Vec<ComponentWire>,
}

#[derive(Deserialize)]
struct ComponentWire {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    func: String,
    #[serde(default)]
    layout: Option<GridWire>,
    #[serde(default)]
    colors: Vec<String>,
}

#[derive(Deserialize, Clone, Copy)]
struct GridWire {
    #[serde(default)]
    grid_rows: Option<i64>,
    #[serde(default)]
    grid_cols: Option<i64>,
    #[serde(default)]
    spacing_px: Option<i64>,
}

impl GridWire {
    /// Coerces counts to at least 1 and spacing to non-negative.
    fn normalize(self, default_spacing: u32) -> SectionLayout {
        let count = |v: Option<i64>| v.unwrap_or(1).clamp(1, i64::from(u32::MAX)) as u32;
        SectionLayout {
            grid_rows: count(self.grid_rows),
            grid_cols: count(self.grid_cols),
            spacing_px: self
                .spacing_px
                .map_or(default_spacing, |s| s.clamp(0, i64::from(u32::MAX)) as u32),
        }
    }
}

/// Sends the cropped region to `client` and reads the answer as a section.
///
/// Colors in the result are whatever the model named: canonical hexes or
/// role names. [`integrate`](super::integrate) maps them onto the palette.
pub fn extract_region_spec(
    region_image: &RgbImage,
    hint: &RegionHint,
    client: &dyn ModelClient,
    vocab: &ComponentVocabulary,
) -> Result<SectionSpec, ExtractionError> {
    let request = ModelRequest::with_image(
        Task::RegionExtraction,
        region_prompt(hint, vocab),
        encode_png(region_image)?,
    );
    let answer = client.complete(&request)?;
    parse_rsu(&answer, hint, vocab)
}

pub(crate) fn parse_rsu(
    answer: &str,
    hint: &RegionHint,
    vocab: &ComponentVocabulary,
) -> Result<SectionSpec, ExtractionError> {
    let payload = extract_json_payload(answer)
        .ok_or_else(|| ExtractionError::Protocol("no JSON object in region answer".into()))?;
    let wire: RsuWire = serde_json::from_str(payload)
        .map_err(|e| ExtractionError::Protocol(format!("region answer: {e}")))?;

    let id = hint.section_id();
    let layout = wire.layout.map_or(
        SectionLayout {
            grid_rows: 1,
            grid_cols: 1,
            spacing_px: DEFAULT_SPACING_PX,
        },
        |g| g.normalize(DEFAULT_SPACING_PX),
    );
    let components = wire
        .components
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let kind = vocab.fold(&c.kind).ok_or_else(|| {
                ExtractionError::Constraint(format!(
                    "component type {:?} is not in the vocabulary",
                    c.kind
                ))
            })?;
            Ok(ComponentSpec {
                kind: kind.to_string(),
                id: format!("{id}-c{}", i + 1),
                func: c.func.trim().to_string(),
                layout: c.layout.map_or(
                    SectionLayout {
                        grid_rows: 1,
                        grid_cols: 1,
                        spacing_px: layout.spacing_px,
                    },
                    |g| g.normalize(layout.spacing_px),
                ),
                colors: normalize_colors(c.colors)?,
            })
        })
        .collect::<Result<Vec<_>, ExtractionError>>()?;

    Ok(SectionSpec {
        id,
        pos: derive_position(&hint.bbox, hint.page_width, hint.page_height),
        layout,
        colors: normalize_colors(wire.colors)?,
        components,
    })
}

/// Uppercases hex colors and keeps role names; drops duplicates.
fn normalize_colors(colors: Vec<String>) -> Result<Vec<String>, ExtractionError> {
    let mut out: Vec<String> = Vec::new();
    for raw in colors {
        let raw = raw.trim();
        let color = if raw.starts_with('#') {
            normalize_hex(raw).ok_or_else(|| {
                ExtractionError::Constraint(format!("{raw:?} is not a #RRGGBB color"))
            })?
        } else if raw.is_empty() {
            continue;
        } else {
            raw.to_string()
        };
        if !out.contains(&color) {
            out.push(color);
        }
    }
    Ok(out)
}
