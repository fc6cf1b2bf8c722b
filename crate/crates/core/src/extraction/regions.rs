//! Region detection and Gestalt-style box grouping.
//!
//! Detection is an external interface: [`SidecarDetector`] reads fixture
//! boxes from a JSON file next to the screenshot. [`postprocess_regions`]
//! merges boxes that read as one visual group and fills whatever the detector
//! left uncovered, so the result always tiles the full page.

use std::fs;
use std::path::PathBuf;

use image::RgbImage;
use serde::Deserialize;

use super::{DetectorError, RegionBox};
use crate::spec::{Anchor, Fraction, PositionSpec};

pub trait DetectorClient: Send + Sync {
    fn detect(&self, image: &RgbImage) -> Result<Vec<RegionBox>, DetectorError>;
}

/// Reads boxes from a sidecar JSON list of `{x, y, w, h}` objects.
#[derive(Debug, Clone)]
pub struct SidecarDetector {
    path: PathBuf,
}

impl SidecarDetector {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }
}

#[derive(Deserialize)]
struct SidecarBox {
    x: i64,
    y: i64,
    w: i64,
    h: i64,
}

/// Parses sidecar text. Negative origins are clamped to zero here; extents
/// past the page are clipped later by [`segment_regions`].
pub(crate) fn parse_sidecar(text: &str) -> Result<Vec<RegionBox>, DetectorError> {
    let raw: Vec<SidecarBox> =
        serde_json::from_str(text).map_err(|e| DetectorError::Failed(format!("sidecar: {e}")))?;
    Ok(raw
        .into_iter()
        .filter_map(|b| {
            let x0 = b.x.max(0);
            let y0 = b.y.max(0);
            let x1 = b.x.saturating_add(b.w);
            let y1 = b.y.saturating_add(b.h);
            (x1 > x0 && y1 > y0).then(|| {
                let clamp = |v: i64| v.clamp(0, i64::from(u32::MAX)) as u32;
                RegionBox::new(clamp(x0), clamp(y0), clamp(x1 - x0), clamp(y1 - y0))
            })
        })
        .collect())
}

impl DetectorClient for SidecarDetector {
    fn detect(&self, _image: &RgbImage) -> Result<Vec<RegionBox>, DetectorError> {
        let text = fs::read_to_string(&self.path)
            .map_err(|e| DetectorError::Failed(format!("{}: {e}", self.path.display())))?;
        parse_sidecar(&text)
    }
}

/// A detector with a fixed answer, e.g. boxes uploaded alongside an image.
#[derive(Debug, Clone, Default)]
pub struct StaticDetector {
    pub boxes: Vec<RegionBox>,
}

impl StaticDetector {
    pub fn new(boxes: Vec<RegionBox>) -> Self {
        Self { boxes }
    }

    pub fn from_sidecar_text(text: &str) -> Result<Self, DetectorError> {
        parse_sidecar(text).map(Self::new)
    }
}

impl DetectorClient for StaticDetector {
    fn detect(&self, _image: &RgbImage) -> Result<Vec<RegionBox>, DetectorError> {
        Ok(self.boxes.clone())
    }
}

/// Runs the detector and clips its boxes to the image.
pub fn segment_regions(
    image: &RgbImage,
    detector: &dyn DetectorClient,
) -> Result<Vec<RegionBox>, DetectorError> {
    let (width, height) = image.dimensions();
    if width == 0 || height == 0 {
        return Err(DetectorError::Failed("empty image".into()));
    }
    let boxes: Vec<RegionBox> = detector
        .detect(image)?
        .iter()
        .filter_map(|b| clip(b, width, height))
        .collect();
    if boxes.is_empty() {
        return Err(DetectorError::EmptyResult);
    }
    Ok(boxes)
}

fn clip(b: &RegionBox, width: u32, height: u32) -> Option<RegionBox> {
    if b.x >= width || b.y >= height {
        return None;
    }
    let w = b.w.min(width - b.x);
    let h = b.h.min(height - b.y);
    (w > 0 && h > 0).then_some(RegionBox { w, h, ..*b })
}

/// Merges visually grouped boxes to a fixpoint, then fills uncovered page
/// area. The output tiles the page, is sorted by `(y, x, h, w)`, and is a
/// fixpoint of this function.
pub fn postprocess_regions(boxes: &[RegionBox], width: u32, height: u32) -> Vec<RegionBox> {
    if width == 0 || height == 0 {
        return Vec::new();
    }
    let mut current: Vec<RegionBox> = boxes
        .iter()
        .filter_map(|b| clip(b, width, height))
        .collect();
    loop {
        merge_to_fixpoint(&mut current, width, height);
        let fillers = uncovered_rectangles(&current, width, height);
        if fillers.is_empty() {
            break;
        }
        current.extend(fillers);
    }
    sort_boxes(&mut current);
    current
}

fn sort_boxes(boxes: &mut [RegionBox]) {
    boxes.sort_by(|a, b| {
        (a.y, a.x, a.h, a.w)
            .cmp(&(b.y, b.x, b.h, b.w))
            .then(a.score.total_cmp(&b.score))
    });
}

fn merge_to_fixpoint(boxes: &mut Vec<RegionBox>, width: u32, height: u32) {
    loop {
        sort_boxes(boxes);
        let mut best: Option<(u64, usize, usize)> = None;
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                if !groups(&boxes[i], &boxes[j], width, height) {
                    continue;
                }
                let area = joint(&boxes[i], &boxes[j]).area();
                if best.is_none_or(|(a, _, _)| area < a) {
                    best = Some((area, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { return };
        let merged = joint(&boxes[i], &boxes[j]);
        boxes.remove(j);
        boxes[i] = merged;
    }
}

fn joint(a: &RegionBox, b: &RegionBox) -> RegionBox {
    let x = a.x.min(b.x);
    let y = a.y.min(b.y);
    RegionBox {
        x,
        y,
        w: a.right().max(b.right()) - x,
        h: a.bottom().max(b.bottom()) - y,
        score: a.score.max(b.score),
    }
}

/// Length of the overlap of `[a0, a1)` and `[b0, b1)`.
fn overlap(a0: u32, a1: u32, b0: u32, b1: u32) -> u32 {
    a1.min(b1).saturating_sub(a0.max(b0))
}

/// Strictly positive separation between two intervals, if any.
fn gap(a0: u32, a1: u32, b0: u32, b1: u32) -> Option<u32> {
    if b0 > a1 {
        Some(b0 - a1)
    } else if a0 > b1 {
        Some(a0 - b1)
    } else {
        None
    }
}

fn groups(a: &RegionBox, b: &RegionBox, width: u32, height: u32) -> bool {
    enclosed(a, b) || proximate(a, b, width, height) || aligned(a, b)
}

fn enclosed(a: &RegionBox, b: &RegionBox) -> bool {
    let inter = u64::from(overlap(a.x, a.right(), b.x, b.right()))
        * u64::from(overlap(a.y, a.bottom(), b.y, b.bottom()));
    100 * inter >= 95 * a.area().min(b.area())
}

fn proximate(a: &RegionBox, b: &RegionBox, width: u32, height: u32) -> bool {
    let near = |g: u32, dim: u32| g <= 8 || u64::from(g) * 100 <= u64::from(dim);
    let projected = |ov: u32, la: u32, lb: u32| 2 * u64::from(ov) >= u64::from(la.min(lb));
    let horizontal = gap(a.x, a.right(), b.x, b.right()).is_some_and(|g| near(g, width))
        && projected(overlap(a.y, a.bottom(), b.y, b.bottom()), a.h, b.h);
    let vertical = gap(a.y, a.bottom(), b.y, b.bottom()).is_some_and(|g| near(g, height))
        && projected(overlap(a.x, a.right(), b.x, b.right()), a.w, b.w);
    horizontal || vertical
}

fn aligned(a: &RegionBox, b: &RegionBox) -> bool {
    let close = |p: u32, q: u32| p.abs_diff(q) <= 4;
    let columns = close(a.x, b.x) && close(a.right(), b.right());
    let rows = close(a.y, b.y) && close(a.bottom(), b.bottom());
    (columns && gap(a.y, a.bottom(), b.y, b.bottom()).is_some_and(|g| g <= 16))
        || (rows && gap(a.x, a.right(), b.x, b.right()).is_some_and(|g| g <= 16))
}

/// Greedy rectangles over the uncovered cells of the grid induced by every
/// box edge and the page border.
fn uncovered_rectangles(boxes: &[RegionBox], width: u32, height: u32) -> Vec<RegionBox> {
    let mut xs: Vec<u32> = [0, width]
        .into_iter()
        .chain(boxes.iter().flat_map(|b| [b.x, b.right()]))
        .collect();
    let mut ys: Vec<u32> = [0, height]
        .into_iter()
        .chain(boxes.iter().flat_map(|b| [b.y, b.bottom()]))
        .collect();
    xs.sort_unstable();
    xs.dedup();
    ys.sort_unstable();
    ys.dedup();
    let (cols, rows) = (xs.len() - 1, ys.len() - 1);

    let mut open = vec![vec![false; cols]; rows];
    for r in 0..rows {
        for c in 0..cols {
            open[r][c] = !boxes.iter().any(|b| {
                b.x <= xs[c] && xs[c + 1] <= b.right() && b.y <= ys[r] && ys[r + 1] <= b.bottom()
            });
        }
    }

    let mut out = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if !open[r][c] {
                continue;
            }
            let mut c_end = c + 1;
            while c_end < cols && open[r][c_end] {
                c_end += 1;
            }
            let mut r_end = r + 1;
            while r_end < rows && (c..c_end).all(|k| open[r_end][k]) {
                r_end += 1;
            }
            for row in open.iter_mut().take(r_end).skip(r) {
                row[c..c_end].fill(false);
            }
            out.push(RegionBox {
                x: xs[c],
                y: ys[r],
                w: xs[c_end] - xs[c],
                h: ys[r_end] - ys[r],
                score: 0.0,
            });
        }
    }
    out
}

/// Relative position of a region on the page.
///
/// Near-full boxes are `full`; full-width bands anchor to the top or bottom
/// edge they touch (within 5%), else `center`, and full-height bands likewise
/// to left or right, with the fraction measured along the banded axis. Other
/// boxes anchor to the nearest page side within 10% of the page, else
/// `center` with their area share.
pub fn derive_position(bbox: &RegionBox, width: u32, height: u32) -> PositionSpec {
    let (w, h) = (f64::from(width.max(1)), f64::from(height.max(1)));
    let wide = u64::from(bbox.w) * 100 >= u64::from(width) * 95;
    let tall = u64::from(bbox.h) * 100 >= u64::from(height) * 95;
    let share = |v: f64| {
        let f = Fraction::from_f64_rounded(v.min(1.0));
        if f.units() == 0 {
            Fraction::from_units(1)
        } else {
            f
        }
    };
    // Which side of a band's axis it touches: 0 = start, 1 = neither, 2 = end.
    let side = |start: u32, len: u32, total: u32| {
        let before = u64::from(start);
        let after = u64::from(total.saturating_sub(start + len));
        let touches = |g: u64| g * 20 <= u64::from(total);
        match (touches(before), touches(after)) {
            (true, false) => 0,
            (false, true) => 2,
            (true, true) if before <= after => 0,
            (true, true) => 2,
            (false, false) => 1,
        }
    };
    let (anchor, fraction) = match (wide, tall) {
        (true, true) => (Anchor::Full, Fraction::ONE),
        (true, false) => {
            let anchor =
                [Anchor::Top, Anchor::Center, Anchor::Bottom][side(bbox.y, bbox.h, height)];
            (anchor, share(f64::from(bbox.h) / h))
        }
        (false, true) => {
            let anchor = [Anchor::Left, Anchor::Center, Anchor::Right][side(bbox.x, bbox.w, width)];
            (anchor, share(f64::from(bbox.w) / w))
        }
        (false, false) => {
            let sides = [
                (Anchor::Left, f64::from(bbox.x) / w),
                (
                    Anchor::Right,
                    f64::from(width.saturating_sub(bbox.right())) / w,
                ),
                (Anchor::Top, f64::from(bbox.y) / h),
                (
                    Anchor::Bottom,
                    f64::from(height.saturating_sub(bbox.bottom())) / h,
                ),
            ];
            let (side, dist) =
                sides
                    .into_iter()
                    .fold((Anchor::Center, f64::INFINITY), |best, s| {
                        if s.1 < best.1 {
                            s
                        } else {
                            best
                        }
                    });
            match side {
                _ if dist > 0.1 => (Anchor::Center, share(bbox.area() as f64 / (w * h))),
                Anchor::Left | Anchor::Right => (side, share(f64::from(bbox.w) / w)),
                _ => (side, share(f64::from(bbox.h) / h)),
            }
        }
    };
    PositionSpec { anchor, fraction }
}
