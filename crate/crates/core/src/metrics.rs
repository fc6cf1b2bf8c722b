//! Fidelity of a rendered UI against its reference screenshot.
//!
//! `mse` is the per-channel RGB mean squared error on the 0-255 scale.
//! `ssim` is single-scale SSIM on luma with an 11x11 Gaussian window
//! (sigma 1.5, K1 = 0.01, K2 = 0.03, L = 255), averaged over the valid part
//! of the map. When sizes differ the second image is bilinearly resized to
//! the first.

use std::borrow::Cow;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use image::RgbImage;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Pipeline-level values the reference system reported for its best
/// configuration. Context for reports only; not reproduced here.
pub const REFERENCE_PIPELINE_MSE: f64 = 40.9930;
pub const REFERENCE_PIPELINE_SSIM: f64 = 0.854;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
const DYNAMIC_RANGE: f64 = 255.0;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty image")]
    EmptyImage,
    #[error("cannot read {path}: {reason}")]
    Load { path: PathBuf, reason: String },
    #[error("embedding scorer failed: {0}")]
    Scorer(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub mse: f64,
    pub ssim: f64,
    pub embed_sim: Option<f64>,
}

/// An external image-embedding similarity, e.g. a CLIP service.
pub trait EmbeddingScorer: Send + Sync {
    fn similarity(&self, render: &RgbImage, reference: &RgbImage) -> Result<f64, MetricsError>;
}

pub fn load_png(path: impl AsRef<Path>) -> Result<RgbImage, MetricsError> {
    let path = path.as_ref();
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|e| MetricsError::Load {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
}

fn matched<'a>(a: &RgbImage, b: &'a RgbImage) -> Result<Cow<'a, RgbImage>, MetricsError> {
    if a.width() == 0 || a.height() == 0 || b.width() == 0 || b.height() == 0 {
        return Err(MetricsError::EmptyImage);
    }
    if a.dimensions() == b.dimensions() {
        Ok(Cow::Borrowed(b))
    } else {
        Ok(Cow::Owned(imageops::resize(
            b,
            a.width(),
            a.height(),
            FilterType::Triangle,
        )))
    }
}

pub fn mse(a: &RgbImage, b: &RgbImage) -> Result<f64, MetricsError> {
    let b = matched(a, b)?;
    let total: f64 = a
        .as_raw()
        .iter()
        .zip(b.as_raw())
        .map(|(x, y)| {
            let d = f64::from(*x) - f64::from(*y);
            d * d
        })
        .sum();
    Ok(total / a.as_raw().len() as f64)
}

fn luma(img: &RgbImage) -> Vec<f64> {
    img.pixels()
        .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
        .collect()
}

/// Window side for an image whose smaller side is `min_side`: 11, or the
/// largest odd number not above `min_side`.
pub fn ssim_window(min_side: usize) -> usize {
    let w = SSIM_WINDOW.min(min_side);
    if w.is_multiple_of(2) {
        w.saturating_sub(1).max(1)
    } else {
        w.max(1)
    }
}

/// Normalized 1-D Gaussian taps.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let center = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - center;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Valid-mode separable filtering of a `w x h` plane.
fn filter(plane: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (ow, oh) = (w - k + 1, h - k + 1);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&line[x..x + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * rows[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64, MetricsError> {
    let b = matched(a, b)?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    let taps = gaussian_taps(ssim_window(w.min(h)), SSIM_SIGMA);
    let (la, lb) = (luma(a), luma(&b));
    let sq = |p: &[f64]| p.iter().map(|v| v * v).collect::<Vec<_>>();
    let cross: Vec<f64> = la.iter().zip(&lb).map(|(x, y)| x * y).collect();

    let mu_a = filter(&la, w, h, &taps);
    let mu_b = filter(&lb, w, h, &taps);
    let e_aa = filter(&sq(&la), w, h, &taps);
    let e_bb = filter(&sq(&lb), w, h, &taps);
    let e_ab = filter(&cross, w, h, &taps);

    let c1 = (SSIM_K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (SSIM_K2 * DYNAMIC_RANGE).powi(2);
    let n = mu_a.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok((total / n as f64).clamp(-1.0, 1.0))
}

/// Scores `render` against `reference`; the render is resized if needed.
pub fn evaluate_fidelity(
    render: &RgbImage,
    reference: &RgbImage,
    scorer: Option<&dyn EmbeddingScorer>,
) -> Result<MetricsRecord, MetricsError> {
    Ok(MetricsRecord {
        mse: mse(reference, render)?,
        ssim: ssim(reference, render)?,
        embed_sim: scorer
            .map(|s| s.similarity(render, reference))
            .transpose()?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredPair {
    pub render: PathBuf,
    pub reference: PathBuf,
    #[serde(flatten)]
    pub record: MetricsRecord,
}

/// Scores `(render, reference)` PNG pairs in parallel, keeping input order.
pub fn evaluate_batch(
    pairs: &[(PathBuf, PathBuf)],
    scorer: Option<&dyn EmbeddingScorer>,
) -> Result<Vec<ScoredPair>, MetricsError> {
    pairs
        .par_iter()
        .map(|(render, reference)| {
            let record = evaluate_fidelity(&load_png(render)?, &load_png(reference)?, scorer)?;
            Ok(ScoredPair {
                render: render.clone(),
                reference: reference.clone(),
                record,
            })
        })
        .collect()
}

/// CSV with columns `render,reference,mse,ssim,embed_sim`.
pub fn write_csv(out: impl Write, rows: &[ScoredPair]) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["render", "reference", "mse", "ssim", "embed_sim"])?;
    for r in rows {
        w.write_record([
            r.render.display().to_string(),
            r.reference.display().to_string(),
            r.record.mse.to_string(),
            r.record.ssim.to_string(),
            r.record
                .embed_sim
                .map(|v| v.to_string())
                .unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
