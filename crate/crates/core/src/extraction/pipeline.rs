use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use image::{imageops, RgbImage};
use serde::Serialize;

use super::{
    extract_global_profile, extract_region_spec, integrate, postprocess_regions, segment_regions,
    DetectorClient, DetectorError, ExtractionError, GlobalDesignProfile, RegionBox, RegionHint,
};
use crate::client::ModelClient;
use crate::spec::{ComponentVocabulary, SectionSpec, SpecDocument};
use crate::validate::validate_with;

#[derive(Debug, Clone)]
pub struct ExtractionOptions {
    pub page_goal: String,
    /// Concurrent region requests.
    pub parallelism: usize,
    pub vocabulary: ComponentVocabulary,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        Self {
            page_goal: String::new(),
            parallelism: 4,
            vocabulary: ComponentVocabulary::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtractionOutput {
    pub regions: Vec<RegionBox>,
    pub profile: GlobalDesignProfile,
    pub spec: SpecDocument,
}

/// Full pipeline: detect, group, extract each region, extract the page
/// profile, integrate. A detector that finds nothing yields one full-page
/// region.
pub fn extract_spec(
    image: &RgbImage,
    detector: &dyn DetectorClient,
    client: &dyn ModelClient,
    options: &ExtractionOptions,
) -> Result<ExtractionOutput, ExtractionError> {
    let (width, height) = image.dimensions();
    let detected = match segment_regions(image, detector) {
        Ok(boxes) => boxes,
        Err(DetectorError::EmptyResult) => vec![RegionBox::new(0, 0, width, height)],
        Err(e) => return Err(e.into()),
    };
    let regions = postprocess_regions(&detected, width, height);

    let hints: Vec<RegionHint> = regions
        .iter()
        .enumerate()
        .map(|(index, bbox)| RegionHint {
            index,
            bbox: *bbox,
            page_width: width,
            page_height: height,
        })
        .collect();
    let sections = extract_regions(image, &hints, client, options)?;
    let profile = extract_global_profile(image, client)?;
    let spec = integrate(&profile, &sections, &options.page_goal);

    let report = validate_with(&spec, &options.vocabulary);
    if !report.ok {
        let detail: Vec<String> = report
            .violations
            .iter()
            .map(|v| format!("{} ({:?})", v.path, v.code))
            .collect();
        return Err(ExtractionError::Constraint(format!(
            "integrated SPEC does not validate: {}",
            detail.join(", ")
        )));
    }
    Ok(ExtractionOutput {
        regions,
        profile,
        spec,
    })
}

/// Region requests on a small worker pool. Results keep region order and the
/// error reported is the one for the lowest failing region.
fn extract_regions(
    image: &RgbImage,
    hints: &[RegionHint],
    client: &dyn ModelClient,
    options: &ExtractionOptions,
) -> Result<Vec<SectionSpec>, ExtractionError> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<SectionSpec, ExtractionError>>>> =
        Mutex::new((0..hints.len()).map(|_| None).collect());
    let workers = options.parallelism.clamp(1, hints.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(hint) = hints.get(i) else { break };
                let b = hint.bbox;
                let crop = imageops::crop_imm(image, b.x, b.y, b.w, b.h).to_image();
                let result = extract_region_spec(&crop, hint, client, &options.vocabulary);
                results.lock().expect("results lock")[i] = Some(result);
            });
        }
    });

    results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every region is processed"))
        .collect()
}
