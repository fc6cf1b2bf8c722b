//! Directory-per-session persistence.
//!
//! ```text
//! <data>/sessions/s-1/manifest.json
//! <data>/sessions/s-1/references/r-1.png, r-1.json
//! <data>/sessions/s-1/versions/v-1.json
//! <data>/sessions/s-1/artifacts/v-2/...
//! ```
//!
//! Every file is written to a temporary sibling, synced and renamed into
//! place. Content files land before the manifest that names them, so the
//! manifest is the commit point: after a crash the session is whatever the
//! last complete manifest says, and stray files are ignored.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use uispec::edit::EditInstruction;
use uispec::spec::{parse_spec, serialize_spec, SpecDocument};

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("storage: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProducedBy {
    Compose,
    Edit,
    ExtractMerge,
}

/// An immutable snapshot in a session's history tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionNode {
    pub id: String,
    pub parent: Option<String>,
    pub spec: SpecDocument,
    pub produced_by: ProducedBy,
    pub edits: Vec<EditInstruction>,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionEntry {
    pub id: String,
    pub parent: Option<String>,
    pub produced_by: ProducedBy,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub ref_id: String,
    /// Relative to the session directory.
    pub image: String,
    pub spec: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub version_id: String,
    pub dir: String,
    pub files: Vec<String>,
    pub compile_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: String,
    pub head: Option<String>,
    pub next_ref: u64,
    pub next_version: u64,
    pub references: Vec<ReferenceEntry>,
    pub versions: Vec<VersionEntry>,
    pub artifacts: Vec<ArtifactEntry>,
}

/// A loaded session. Mutations write through to disk before they change the
/// in-memory state.
#[derive(Debug)]
pub struct Session {
    dir: PathBuf,
    manifest: Manifest,
    versions: BTreeMap<String, VersionNode>,
    references: BTreeMap<String, SpecDocument>,
}

const MANIFEST: &str = "manifest.json";

/// Sync-and-rename write.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PersistError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::Builder::new().prefix(".tmp-").tempfile_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    sync_dir(dir);
    Ok(())
}

fn sync_dir(dir: &Path) {
    // Directory fsync is unsupported on some platforms; the rename is still
    // atomic there.
    if let Ok(d) = fs::File::open(dir) {
        let _ = d.sync_all();
    }
}

fn seq(prefix: &str, id: &str) -> Option<u64> {
    id.strip_prefix(prefix)?.strip_prefix('-')?.parse().ok()
}

impl Session {
    pub fn create(dir: PathBuf, id: &str) -> Result<Self, PersistError> {
        let manifest = Manifest {
            id: id.to_string(),
            head: None,
            next_ref: 1,
            next_version: 1,
            references: Vec::new(),
            versions: Vec::new(),
            artifacts: Vec::new(),
        };
        fs::create_dir_all(&dir)?;
        let session = Self {
            dir,
            manifest,
            versions: BTreeMap::new(),
            references: BTreeMap::new(),
        };
        session.write_manifest(&session.manifest)?;
        Ok(session)
    }

    /// Loads the committed state; every named version must parse and the
    /// head must resolve.
    pub fn load(dir: PathBuf) -> Result<Self, PersistError> {
        let corrupt = |path: &Path, reason: String| PersistError::Corrupt {
            path: path.to_path_buf(),
            reason,
        };
        let mpath = dir.join(MANIFEST);
        let manifest: Manifest = serde_json::from_slice(&fs::read(&mpath)?)
            .map_err(|e| corrupt(&mpath, e.to_string()))?;
        let mut versions = BTreeMap::new();
        for entry in &manifest.versions {
            let path = dir.join("versions").join(format!("{}.json", entry.id));
            let node: VersionNode = serde_json::from_slice(&fs::read(&path)?)
                .map_err(|e| corrupt(&path, e.to_string()))?;
            // Re-check the document through the strict parser.
            parse_spec(&serialize_spec(&node.spec)).map_err(|e| corrupt(&path, e.to_string()))?;
            if node.id != entry.id {
                return Err(corrupt(&path, format!("holds version {}", node.id)));
            }
            versions.insert(node.id.clone(), node);
        }
        if let Some(head) = &manifest.head {
            if !versions.contains_key(head) {
                return Err(corrupt(&mpath, format!("head {head} does not resolve")));
            }
        }
        let mut references = BTreeMap::new();
        for r in &manifest.references {
            let path = dir.join(&r.spec);
            let doc = parse_spec(&fs::read_to_string(&path)?)
                .map_err(|e| corrupt(&path, e.to_string()))?;
            references.insert(r.ref_id.clone(), doc);
        }
        Ok(Self {
            dir,
            manifest,
            versions,
            references,
        })
    }

    fn write_manifest(&self, manifest: &Manifest) -> Result<(), PersistError> {
        let bytes = serde_json::to_vec_pretty(manifest).expect("manifests serialize");
        write_atomic(&self.dir.join(MANIFEST), &bytes)
    }

    /// Writes `manifest` and adopts it once it is durable.
    fn commit(&mut self, manifest: Manifest) -> Result<(), PersistError> {
        self.write_manifest(&manifest)?;
        self.manifest = manifest;
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.manifest.id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn head(&self) -> Option<&VersionNode> {
        self.manifest
            .head
            .as_ref()
            .and_then(|h| self.versions.get(h))
    }

    pub fn version(&self, id: &str) -> Option<&VersionNode> {
        self.versions.get(id)
    }

    /// Versions in creation order.
    pub fn versions(&self) -> impl Iterator<Item = &VersionNode> {
        self.manifest
            .versions
            .iter()
            .filter_map(|e| self.versions.get(&e.id))
    }

    pub fn reference(&self, ref_id: &str) -> Option<&SpecDocument> {
        self.references.get(ref_id)
    }

    pub fn references(&self) -> &BTreeMap<String, SpecDocument> {
        &self.references
    }

    pub fn reference_image(&self, ref_id: &str) -> Option<PathBuf> {
        self.manifest
            .references
            .iter()
            .find(|r| r.ref_id == ref_id)
            .map(|r| self.dir.join(&r.image))
    }

    pub fn add_reference(
        &mut self,
        png: &[u8],
        spec: SpecDocument,
    ) -> Result<String, PersistError> {
        let n = self.manifest.next_ref;
        let ref_id = format!("r-{n}");
        let image = format!("references/{ref_id}.png");
        let spec_file = format!("references/{ref_id}.json");
        write_atomic(&self.dir.join(&image), png)?;
        write_atomic(&self.dir.join(&spec_file), serialize_spec(&spec).as_bytes())?;
        let mut next = self.manifest.clone();
        next.next_ref = n + 1;
        next.references.push(ReferenceEntry {
            ref_id: ref_id.clone(),
            image,
            spec: spec_file,
        });
        self.commit(next)?;
        self.references.insert(ref_id.clone(), spec);
        Ok(ref_id)
    }

    /// Appends a child of the current head (or the root) and moves head to it.
    pub fn add_version(
        &mut self,
        spec: SpecDocument,
        produced_by: ProducedBy,
        edits: Vec<EditInstruction>,
        created_at: String,
    ) -> Result<&VersionNode, PersistError> {
        let n = self.manifest.next_version;
        let node = VersionNode {
            id: format!("v-{n}"),
            parent: self.manifest.head.clone(),
            spec,
            produced_by,
            edits,
            created_at,
        };
        let path = self.dir.join("versions").join(format!("{}.json", node.id));
        write_atomic(
            &path,
            &serde_json::to_vec_pretty(&node).expect("versions serialize"),
        )?;
        let mut next = self.manifest.clone();
        next.next_version = n + 1;
        next.head = Some(node.id.clone());
        next.versions.push(VersionEntry {
            id: node.id.clone(),
            parent: node.parent.clone(),
            produced_by,
            created_at: node.created_at.clone(),
        });
        self.commit(next)?;
        let id = node.id.clone();
        self.versions.insert(id.clone(), node);
        Ok(&self.versions[&id])
    }

    /// Moves head; returns `false` when the version is unknown.
    pub fn rollback(&mut self, version_id: &str) -> Result<bool, PersistError> {
        if !self.versions.contains_key(version_id) {
            return Ok(false);
        }
        let mut next = self.manifest.clone();
        next.head = Some(version_id.to_string());
        self.commit(next)?;
        Ok(true)
    }

    /// Stores generated files under `artifacts/<version>/`, replacing any
    /// earlier artifact of the same version.
    pub fn add_artifact(
        &mut self,
        version_id: &str,
        files: &BTreeMap<String, String>,
        compile_ok: bool,
    ) -> Result<ArtifactEntry, PersistError> {
        let dir = format!("artifacts/{version_id}");
        for (path, text) in files {
            write_atomic(&self.dir.join(&dir).join(path), text.as_bytes())?;
        }
        let entry = ArtifactEntry {
            version_id: version_id.to_string(),
            dir,
            files: files.keys().cloned().collect(),
            compile_ok,
        };
        let mut next = self.manifest.clone();
        next.artifacts.retain(|a| a.version_id != version_id);
        next.artifacts.push(entry.clone());
        self.commit(next)?;
        Ok(entry)
    }

    pub fn artifact(&self, version_id: &str) -> Option<&ArtifactEntry> {
        self.manifest
            .artifacts
            .iter()
            .find(|a| a.version_id == version_id)
    }

    /// Longest root-to-node chain, counted in nodes.
    pub fn depth(&self) -> usize {
        self.versions
            .keys()
            .map(|id| {
                let mut d = 0;
                let mut at = Some(id.as_str());
                while let Some(v) = at.and_then(|i| self.versions.get(i)) {
                    d += 1;
                    at = v.parent.as_deref();
                }
                d
            })
            .max()
            .unwrap_or(0)
    }
}

/// The sessions directory of a data root.
#[derive(Debug, Clone)]
pub struct SessionRoot {
    dir: PathBuf,
}

impl SessionRoot {
    pub fn new(data_dir: impl AsRef<Path>) -> Result<Self, PersistError> {
        let dir = data_dir.as_ref().join("sessions");
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Loads every committed session and returns the next free sequence
    /// number. Directories without a manifest (a crash during creation)
    /// still reserve their number.
    pub fn load_all(&self) -> Result<(Vec<Session>, u64), PersistError> {
        let mut sessions = Vec::new();
        let mut max = 0;
        let mut names: Vec<String> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .filter_map(|e| e.file_name().into_string().ok())
            .collect();
        names.sort_by_key(|n| seq("s", n).unwrap_or(u64::MAX));
        for name in names {
            let Some(n) = seq("s", &name) else { continue };
            max = max.max(n);
            let dir = self.dir.join(&name);
            if dir.join(MANIFEST).exists() {
                sessions.push(Session::load(dir)?);
            }
        }
        Ok((sessions, max + 1))
    }

    pub fn create(&self, n: u64) -> Result<Session, PersistError> {
        let id = format!("s-{n}");
        Session::create(self.dir.join(&id), &id)
    }
}
