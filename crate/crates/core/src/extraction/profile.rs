use std::collections::HashSet;

use image::RgbImage;
use serde::Deserialize;

use super::{encode_png, ExtractionError, GlobalDesignProfile};
use crate::client::{extract_json_payload, ModelClient, ModelRequest, Task};
use crate::spec::{normalize_hex, ColorToken};

const PROFILE_PROMPT: &str = "\
## task: global-profile
You are given a full UI screenshot. Summarize its global design profile:
the overall tone (visual style and shape language, including the corner
radius in px if visible), the dominant colors with a semantic role for each,
and the recurring layout rhythm (column grid and base spacing in px).
Answer with one JSON object:
{\"tone\":\"...\",\"palette\":[{\"hex\":\"#RRGGBB\",\"role\":\"...\"}],\"layout_rhythm\":\"...\"}
";

#[derive(Deserialize)]
struct ProfileWire {
    #[serde(default)]
    tone: String,
    #[serde(default)]
    palette: Vec<ColorWire>,
    #[serde(default)]
    layout_rhythm: String,
}

#[derive(Deserialize)]
struct ColorWire {
    hex: String,
    role: String,
}

pub fn extract_global_profile(
    image: &RgbImage,
    client: &dyn ModelClient,
) -> Result<GlobalDesignProfile, ExtractionError> {
    let (w, h) = image.dimensions();
    let prompt = format!("{PROFILE_PROMPT}\npage: {w}x{h}\n");
    let request = ModelRequest::with_image(Task::GlobalProfile, prompt, encode_png(image)?);
    parse_profile(&client.complete(&request)?)
}

pub(crate) fn parse_profile(answer: &str) -> Result<GlobalDesignProfile, ExtractionError> {
    let payload = extract_json_payload(answer)
        .ok_or_else(|| ExtractionError::Protocol("no JSON object in profile answer".into()))?;
    let wire: ProfileWire = serde_json::from_str(payload)
        .map_err(|e| ExtractionError::Protocol(format!("profile answer: {e}")))?;
    let mut roles = HashSet::new();
    let mut palette = Vec::with_capacity(wire.palette.len());
    for c in wire.palette {
        let hex = normalize_hex(&c.hex).ok_or_else(|| {
            ExtractionError::Protocol(format!("palette color {:?} is not #RRGGBB", c.hex))
        })?;
        let role = c.role.trim().to_string();
        if role.is_empty() || !roles.insert(role.clone()) {
            return Err(ExtractionError::Protocol(format!(
                "palette role {role:?} is empty or repeated"
            )));
        }
        palette.push(ColorToken::new(hex, role));
    }
    Ok(GlobalDesignProfile {
        tone: wire.tone.trim().to_string(),
        palette,
        layout_rhythm: wire.layout_rhythm.trim().to_string(),
    })
}
