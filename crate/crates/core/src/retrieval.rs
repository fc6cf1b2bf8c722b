//! Exemplar store for retrieval-grounded generation.
//!
//! Documents are embedded by a deterministic structural featurization: a
//! component-type histogram, eight layout scalars and a palette hue
//! histogram. Retrieval is an exact cosine scan, which is fast enough for
//! stores of a few thousand records and keeps results reproducible.

use std::cmp::Ordering;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spec::{serialize_spec, ComponentVocabulary, SpecDocument};
use crate::validate::validate_with;

pub const LAYOUT_FEATURES: usize = 8;
pub const HUE_BUCKETS: usize = 12;
pub const DEFAULT_K: usize = 2;

/// Turns a document into a fixed-length vector.
pub trait SpecEmbedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, doc: &SpecDocument) -> Vec<f64>;
}

/// The default embedder; see [`featurize_spec_with`].
#[derive(Debug, Clone, Default)]
pub struct StructuralFeatures {
    pub vocabulary: ComponentVocabulary,
}

impl SpecEmbedder for StructuralFeatures {
    fn dimension(&self) -> usize {
        self.vocabulary.len() + LAYOUT_FEATURES + HUE_BUCKETS
    }

    fn embed(&self, doc: &SpecDocument) -> Vec<f64> {
        featurize_spec_with(doc, &self.vocabulary)
    }
}

pub fn featurize_spec(doc: &SpecDocument) -> Vec<f64> {
    featurize_spec_with(doc, &ComponentVocabulary::default())
}

/// `V + 8 + 12` features, each rounded to 9 decimal places.
pub fn featurize_spec_with(doc: &SpecDocument, vocab: &ComponentVocabulary) -> Vec<f64> {
    let mut out = Vec::with_capacity(vocab.len() + LAYOUT_FEATURES + HUE_BUCKETS);

    let mut counts = vec![0.0; vocab.len()];
    for comp in doc.components() {
        if let Some(i) = vocab.position(&comp.kind) {
            counts[i] += 1.0;
        }
    }
    out.extend(l1_normalized(counts));

    let sections = &doc.sections;
    let mean = |f: &dyn Fn(&crate::spec::SectionSpec) -> f64| {
        if sections.is_empty() {
            0.0
        } else {
            sections.iter().map(f).sum::<f64>() / sections.len() as f64
        }
    };
    let g = &doc.global;
    let layout = [
        f64::from(g.layout.grid_columns) / 24.0,
        f64::from(g.layout.spacing_px) / 32.0,
        sections.len() as f64 / 16.0,
        mean(&|s| s.pos.fraction.as_f64()),
        mean(&|s| f64::from(s.layout.grid_rows)) / 8.0,
        mean(&|s| f64::from(s.layout.grid_cols)) / 8.0,
        f64::from(g.shape.corner_radius_px) / 32.0,
        g.colors.len() as f64 / 16.0,
    ];
    out.extend(layout.iter().map(|v| v.clamp(0.0, 1.0)));

    let mut hues = vec![0.0; HUE_BUCKETS];
    for token in &g.colors {
        if let Some(bucket) = hex_hue(&token.hex).map(hue_bucket) {
            hues[bucket] += 1.0;
        }
    }
    out.extend(l1_normalized(hues));

    out.into_iter().map(round9).collect()
}

fn round9(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

fn l1_normalized(v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total == 0.0 {
        v
    } else {
        v.into_iter().map(|x| x / total).collect()
    }
}

/// HSL hue in degrees `[0, 360)`; `None` for grays, which have no hue.
pub(crate) fn hex_hue(hex: &str) -> Option<f64> {
    let digits = hex.strip_prefix('#')?;
    if digits.len() != 6 {
        return None;
    }
    let channel = |i: usize| {
        u8::from_str_radix(&digits[i..i + 2], 16)
            .ok()
            .map(|c| f64::from(c) / 255.0)
    };
    let (r, g, b) = (channel(0)?, channel(2)?, channel(4)?);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    if delta == 0.0 {
        return None;
    }
    let sector = if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    Some(60.0 * sector)
}

/// 30-degree buckets centred on 0, 30, ..., 330.
fn hue_bucket(hue: f64) -> usize {
    (((hue + 15.0) / 30.0).floor() as usize) % HUE_BUCKETS
}

/// Cosine similarity; 0 when either vector is all zeros.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExemplarRecord {
    pub id: String,
    pub spec: SpecDocument,
    pub code: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub record_id: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StoreStats {
    pub records: usize,
    pub dimension: usize,
    pub code_bytes: usize,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage error: {0}")]
    Storage(#[from] std::io::Error),
    #[error("corrupt store record at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("record {id} has a {found}-dimensional vector, expected {expected}")]
    Dimension {
        id: String,
        found: usize,
        expected: usize,
    },
    #[error("exemplar SPEC does not validate")]
    InvalidSpec,
    #[error("the exemplar store is empty")]
    EmptyStore,
    #[error("k must be positive")]
    InvalidK,
    #[error("unknown record {0}")]
    UnknownRecord(String),
}

/// SPEC/code exemplars, optionally backed by a JSONL file.
///
/// Adds take `&mut self`, so a shared store serializes writers behind a lock;
/// each record is written to disk as one line before it becomes visible.
pub struct ExemplarStore {
    path: Option<PathBuf>,
    embedder: Arc<dyn SpecEmbedder>,
    records: Vec<ExemplarRecord>,
    next_id: u64,
}

impl std::fmt::Debug for ExemplarStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExemplarStore")
            .field("path", &self.path)
            .field("records", &self.records.len())
            .finish()
    }
}

impl Default for ExemplarStore {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl ExemplarStore {
    pub fn in_memory() -> Self {
        Self::with_embedder(Arc::new(StructuralFeatures::default()))
    }

    pub fn with_embedder(embedder: Arc<dyn SpecEmbedder>) -> Self {
        Self {
            path: None,
            embedder,
            records: Vec::new(),
            next_id: 1,
        }
    }

    /// Opens (or starts) a JSONL store. A torn final line, left by a crash
    /// mid-append, is ignored.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::open_with(path, Arc::new(StructuralFeatures::default()))
    }

    pub fn open_with(
        path: impl AsRef<Path>,
        embedder: Arc<dyn SpecEmbedder>,
    ) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let mut store = Self::with_embedder(embedder);
        store.path = Some(path.to_path_buf());
        if !path.exists() {
            return Ok(store);
        }
        let text = fs::read_to_string(path)?;
        let complete = text.ends_with('\n');
        let lines: Vec<&str> = text.lines().collect();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: ExemplarRecord = match serde_json::from_str(line) {
                Ok(r) => r,
                Err(_) if i + 1 == lines.len() && !complete => break,
                Err(e) => {
                    return Err(StoreError::Corrupt {
                        line: i + 1,
                        reason: e.to_string(),
                    })
                }
            };
            store.push_loaded(record)?;
        }
        Ok(store)
    }

    /// Loads records from a JSONL reader without attaching a backing file.
    pub fn from_jsonl(reader: impl BufRead) -> Result<Self, StoreError> {
        let mut store = Self::in_memory();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                line: i + 1,
                reason: e.to_string(),
            })?;
            store.push_loaded(record)?;
        }
        Ok(store)
    }

    fn push_loaded(&mut self, record: ExemplarRecord) -> Result<(), StoreError> {
        let expected = self.embedder.dimension();
        if record.vector.len() != expected {
            return Err(StoreError::Dimension {
                id: record.id,
                found: record.vector.len(),
                expected,
            });
        }
        if let Some(n) = numeric_id(&record.id) {
            self.next_id = self.next_id.max(n + 1);
        }
        self.records.push(record);
        Ok(())
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.embedder.dimension()
    }

    pub fn records(&self) -> &[ExemplarRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&ExemplarRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn embed(&self, doc: &SpecDocument) -> Vec<f64> {
        self.embedder.embed(doc)
    }

    pub fn stats(&self) -> StoreStats {
        StoreStats {
            records: self.records.len(),
            dimension: self.dimension(),
            code_bytes: self.records.iter().map(|r| r.code.len()).sum(),
        }
    }

    /// Adds an exemplar and returns its id, `ex-1`, `ex-2`, ...
    pub fn add(
        &mut self,
        spec: SpecDocument,
        code: impl Into<String>,
    ) -> Result<String, StoreError> {
        if !validate_with(&spec, &ComponentVocabulary::default()).ok {
            return Err(StoreError::InvalidSpec);
        }
        let record = ExemplarRecord {
            id: format!("ex-{}", self.next_id),
            vector: self.embedder.embed(&spec),
            spec,
            code: code.into(),
        };
        if let Some(path) = &self.path {
            let mut line = serde_json::to_string(&record).expect("records serialize");
            line.push('\n');
            let mut file = OpenOptions::new().create(true).append(true).open(path)?;
            file.write_all(line.as_bytes())?;
            file.sync_data()?;
        }
        self.next_id += 1;
        let id = record.id.clone();
        self.records.push(record);
        Ok(id)
    }

    /// Writes every record to `path` as JSONL.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let path = path.as_ref();
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        for r in &self.records {
            serde_json::to_writer(&mut tmp, r).map_err(std::io::Error::from)?;
            tmp.write_all(b"\n")?;
        }
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    }

    /// Exact top-`k` by cosine similarity, ties by ascending record id.
    pub fn query(&self, doc: &SpecDocument, k: usize) -> Result<Vec<RetrievalHit>, StoreError> {
        self.query_vector(&self.embedder.embed(doc), k)
    }

    pub fn query_vector(&self, vector: &[f64], k: usize) -> Result<Vec<RetrievalHit>, StoreError> {
        if k == 0 {
            return Err(StoreError::InvalidK);
        }
        if self.records.is_empty() {
            return Err(StoreError::EmptyStore);
        }
        let mut hits: Vec<(&ExemplarRecord, f64)> = self
            .records
            .iter()
            .map(|r| (r, cosine(vector, &r.vector)))
            .collect();
        hits.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| record_order(&a.0.id, &b.0.id))
        });
        Ok(hits
            .into_iter()
            .take(k)
            .map(|(r, similarity)| RetrievalHit {
                record_id: r.id.clone(),
                similarity,
            })
            .collect())
    }
}

fn numeric_id(id: &str) -> Option<u64> {
    id.strip_prefix("ex-")?.parse().ok()
}

/// `ex-2` sorts before `ex-10`; other ids sort after, lexicographically.
pub fn record_order(a: &str, b: &str) -> Ordering {
    match (numeric_id(a), numeric_id(b)) {
        (Some(x), Some(y)) => x.cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.cmp(b),
    }
}

/// Prompt block with each retrieved exemplar (SPEC then code) in hit order,
/// followed by the target SPEC.
pub fn build_fewshot_block(
    doc: &SpecDocument,
    hits: &[RetrievalHit],
    store: &ExemplarStore,
) -> Result<String, StoreError> {
    let mut out = String::new();
    for (i, hit) in hits.iter().enumerate() {
        let record = store
            .get(&hit.record_id)
            .ok_or_else(|| StoreError::UnknownRecord(hit.record_id.clone()))?;
        let n = i + 1;
        out.push_str(&format!(
            "### EXEMPLAR {n} ({}, similarity {:.9})\n{}\n### CODE {n}\n{}\n",
            record.id,
            hit.similarity,
            serialize_spec(&record.spec),
            record.code.trim_end()
        ));
        out.push_str(&format!("### END EXEMPLAR {n}\n\n"));
    }
    out.push_str("### TARGET SPEC\n");
    out.push_str(&serialize_spec(doc));
    out.push('\n');
    Ok(out)
}
