//! Reference screenshot to [`SpecDocument`](crate::spec::SpecDocument): region detection, box
//! post-processing, per-region extraction, a whole-page design profile, and
//! integration of the pieces into a validating document.

mod integrate;
mod pipeline;
mod profile;
mod regions;
mod rsu;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::ClientError;
use crate::spec::ColorToken;

pub use integrate::integrate;
pub use pipeline::{extract_spec, ExtractionOptions, ExtractionOutput};
pub use profile::extract_global_profile;
pub use regions::{
    derive_position, postprocess_regions, segment_regions, DetectorClient, SidecarDetector,
    StaticDetector,
};
pub use rsu::{extract_region_spec, RegionHint};

/// A detected region in page pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    #[serde(default = "full_confidence")]
    pub score: f64,
}

fn full_confidence() -> f64 {
    1.0
}

impl RegionBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self {
            x,
            y,
            w,
            h,
            score: 1.0,
        }
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.w > 0 && self.h > 0 && self.right() <= width && self.bottom() <= height
    }
}

/// Whole-page stylistic summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalDesignProfile {
    pub tone: String,
    pub palette: Vec<ColorToken>,
    pub layout_rhythm: String,
}

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("detector failed: {0}")]
    Failed(String),
    #[error("detector returned no boxes")]
    EmptyResult,
}

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("constraint error: {0}")]
    Constraint(String),
    #[error("image error: {0}")]
    Image(String),
}

pub(crate) fn encode_png(image: &image::RgbImage) -> Result<Vec<u8>, ExtractionError> {
    let mut out = std::io::Cursor::new(Vec::new());
    image
        .write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| ExtractionError::Image(e.to_string()))?;
    Ok(out.into_inner())
}
