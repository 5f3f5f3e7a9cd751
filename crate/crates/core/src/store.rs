//! Persisted embedding store with hash-based incremental refresh.
//!
//! On-disk layout of a store directory:
//!
//! * `manifest.json`: `{provider, dim, count, created_utc}`
//! * `items.tsv`: one `item_id \t content_hash \t row_index` line per item,
//!   ids backslash-escaped, hash as 16 lowercase hex digits
//! * `vectors.bin`: `count × dim` little-endian `f32`, row-major
//!
//! A store value is immutable once built; [`refresh`] returns a new
//! generation and never touches the old one.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::content_hash;
use crate::embed::{embed_batch, EmbeddingProvider};
use crate::error::{Error, Result};

pub const DEFAULT_BATCH_SIZE: usize = 32;

const MANIFEST: &str = "manifest.json";
const ITEMS: &str = "items.tsv";
const VECTORS: &str = "vectors.bin";

#[derive(Debug, Clone, PartialEq)]
pub struct StoredVector {
    pub content_hash: u64,
    pub vector: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    provider: String,
    dim: usize,
    created_utc: u64,
    items: BTreeMap<String, StoredVector>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub provider: String,
    pub dim: usize,
    pub count: usize,
    pub created_utc: u64,
}

fn now_utc() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl EmbeddingStore {
    pub fn new(provider: impl Into<String>, dim: usize) -> Self {
        EmbeddingStore {
            provider: provider.into(),
            dim,
            created_utc: now_utc(),
            items: BTreeMap::new(),
        }
    }

    pub fn provider(&self) -> &str {
        &self.provider
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn created_utc(&self) -> u64 {
        self.created_utc
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&StoredVector> {
        self.items.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.items.contains_key(id)
    }

    /// Items in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &StoredVector)> {
        self.items.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn insert(
        &mut self,
        id: impl Into<String>,
        content_hash: u64,
        vector: Vec<f32>,
    ) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::Store("non-finite vector component".into()));
        }
        self.items.insert(
            id.into(),
            StoredVector {
                content_hash,
                vector,
            },
        );
        Ok(())
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            provider: self.provider.clone(),
            dim: self.dim,
            count: self.items.len(),
            created_utc: self.created_utc,
        }
    }

    /// Serialize to the three on-disk files: (manifest, items, vectors).
    pub fn to_parts(&self) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
        let mut manifest =
            serde_json::to_vec_pretty(&self.manifest()).expect("manifest serializes");
        manifest.push(b'\n');
        let mut items = String::new();
        let mut vectors = Vec::with_capacity(self.items.len() * self.dim * 4);
        for (row, (id, sv)) in self.items.iter().enumerate() {
            items.push_str(&escape_id(id));
            items.push_str(&format!("\t{:016x}\t{row}\n", sv.content_hash));
            for x in &sv.vector {
                vectors.extend_from_slice(&x.to_le_bytes());
            }
        }
        (manifest, items.into_bytes(), vectors)
    }

    /// Parse and validate the three on-disk files.
    pub fn from_parts(manifest: &[u8], items: &[u8], vectors: &[u8]) -> Result<Self> {
        let m: Manifest =
            serde_json::from_slice(manifest).map_err(|e| Error::json(MANIFEST, &e))?;
        if m.dim == 0 {
            return Err(Error::Store("dim must be positive".into()));
        }
        let expected_len = m
            .count
            .checked_mul(m.dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Store("count × dim overflows".into()))?;
        if vectors.len() != expected_len {
            return Err(Error::Store(format!(
                "{VECTORS} holds {} bytes, manifest implies {expected_len}",
                vectors.len()
            )));
        }
        let items = std::str::from_utf8(items)
            .map_err(|_| Error::Store(format!("{ITEMS} is not UTF-8")))?;

        let mut store = EmbeddingStore {
            provider: m.provider,
            dim: m.dim,
            created_utc: m.created_utc,
            items: BTreeMap::new(),
        };
        let mut rows_seen = HashSet::new();
        for (lineno, line) in items.lines().enumerate() {
            let bad = |what: &str| Error::Store(format!("{ITEMS} line {}: {what}", lineno + 1));
            let mut fields = line.split('\t');
            let (Some(id), Some(hash), Some(row), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(bad("expected 3 tab-separated fields"));
            };
            let id = unescape_id(id).ok_or_else(|| bad("bad escape in id"))?;
            if hash.len() != 16 {
                return Err(bad("hash must be 16 hex digits"));
            }
            let hash = u64::from_str_radix(hash, 16).map_err(|_| bad("bad hash"))?;
            let row: usize = row.parse().map_err(|_| bad("bad row index"))?;
            if row >= m.count || !rows_seen.insert(row) {
                return Err(bad("row index out of range or repeated"));
            }
            let start = row * m.dim * 4;
            let vector: Vec<f32> = vectors[start..start + m.dim * 4]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(bad("non-finite vector component"));
            }
            if store
                .items
                .insert(
                    id,
                    StoredVector {
                        content_hash: hash,
                        vector,
                    },
                )
                .is_some()
            {
                return Err(bad("duplicate item id"));
            }
        }
        if store.items.len() != m.count {
            return Err(Error::Store(format!(
                "manifest count {} but {} items listed",
                m.count,
                store.items.len()
            )));
        }
        Ok(store)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read(&p).map_err(|e| Error::io(p, e))
        };
        Self::from_parts(&read(MANIFEST)?, &read(ITEMS)?, &read(VECTORS)?)
    }

    /// Write the store to `dir`, replacing any previous generation there.
    ///
    /// Files are written to a sibling staging directory which is then renamed
    /// into place.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let (manifest, items, vectors) = self.to_parts();
        let staging = sibling(dir, "staging");
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        for (name, bytes) in [(MANIFEST, &manifest), (ITEMS, &items), (VECTORS, &vectors)] {
            let p = staging.join(name);
            fs::write(&p, bytes).map_err(|e| Error::io(p, e))?;
        }
        let retired = sibling(dir, "retired");
        if dir.exists() {
            if retired.exists() {
                fs::remove_dir_all(&retired).map_err(|e| Error::io(&retired, e))?;
            }
            fs::rename(dir, &retired).map_err(|e| Error::io(dir, e))?;
        }
        fs::rename(&staging, dir).map_err(|e| Error::io(dir, e))?;
        if retired.exists() {
            fs::remove_dir_all(&retired).map_err(|e| Error::io(&retired, e))?;
        }
        Ok(())
    }
}

fn sibling(dir: &Path, tag: &str) -> PathBuf {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "store".into());
    dir.with_file_name(format!(".{name}.{tag}"))
}

fn escape_id(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for c in id.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape_id(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match chars.next()? {
            '\\' => '\\',
            't' => '\t',
            'n' => '\n',
            'r' => '\r',
            _ => return None,
        });
    }
    Some(out)
}

/// What a refresh did.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RefreshStats {
    pub added: usize,
    pub updated: usize,
    pub removed: usize,
    pub unchanged: usize,
}

impl RefreshStats {
    pub fn re_embedded(&self) -> usize {
        self.added + self.updated
    }

    pub fn changed(&self) -> bool {
        self.added + self.updated + self.removed > 0
    }
}

/// An embedding run that stopped part way.
///
/// `store` is valid and holds everything embedded before the failure;
/// `pending` lists the ids still to embed, so a later refresh resumes.
#[derive(Debug, Error)]
#[error("{source} ({} items pending)", pending.len())]
pub struct BuildFailure {
    pub store: EmbeddingStore,
    pub pending: Vec<String>,
    #[source]
    pub source: Error,
}

/// Embed every `(item_id, text)` into a fresh store.
pub fn build_store(
    items: &[(String, String)],
    provider: &dyn EmbeddingProvider,
    batch_size: usize,
) -> std::result::Result<EmbeddingStore, Box<BuildFailure>> {
    let empty = EmbeddingStore::new(provider.name(), provider.dim());
    refresh(&empty, items, provider, batch_size).map(|(s, _)| s)
}

/// Bring `store` in line with `current`: drop vanished ids, re-embed ids whose
/// text hash changed, keep the rest untouched.
///
/// A store built by a different provider (name or dim) is rebuilt from scratch.
pub fn refresh(
    store: &EmbeddingStore,
    current: &[(String, String)],
    provider: &dyn EmbeddingProvider,
    batch_size: usize,
) -> std::result::Result<(EmbeddingStore, RefreshStats), Box<BuildFailure>> {
    let batch_size = batch_size.max(1);
    let compatible = store.provider == provider.name() && store.dim == provider.dim();
    if !compatible {
        log::warn!(
            "store was built by {} (dim {}), rebuilding with {} (dim {})",
            store.provider,
            store.dim,
            provider.name(),
            provider.dim()
        );
    }

    let mut next = EmbeddingStore {
        provider: provider.name().to_string(),
        dim: provider.dim(),
        created_utc: store.created_utc,
        items: BTreeMap::new(),
    };
    let mut stats = RefreshStats::default();
    let mut todo: Vec<(&str, &str, u64)> = Vec::new();
    let mut seen = HashSet::new();

    for (id, text) in current {
        if !seen.insert(id.as_str()) {
            log::warn!("duplicate item id {id}, keeping the first");
            continue;
        }
        let hash = content_hash(text);
        match store.items.get(id) {
            Some(sv) if compatible && sv.content_hash == hash => {
                next.items.insert(id.clone(), sv.clone());
                stats.unchanged += 1;
            }
            Some(_) => {
                stats.updated += 1;
                todo.push((id, text, hash));
            }
            None => {
                stats.added += 1;
                todo.push((id, text, hash));
            }
        }
    }
    stats.removed = store
        .items
        .keys()
        .filter(|k| !seen.contains(k.as_str()))
        .count();

    for (b, chunk) in todo.chunks(batch_size).enumerate() {
        let texts: Vec<&str> = chunk.iter().map(|(_, t, _)| *t).collect();
        match embed_batch(&texts, provider, b) {
            Ok(vectors) => {
                for ((id, _, hash), v) in chunk.iter().zip(vectors) {
                    next.items.insert(
                        id.to_string(),
                        StoredVector {
                            content_hash: *hash,
                            vector: v,
                        },
                    );
                }
            }
            Err(e) => {
                let pending = todo[b * batch_size..]
                    .iter()
                    .map(|(id, _, _)| id.to_string())
                    .collect();
                next.created_utc = now_utc();
                return Err(Box::new(BuildFailure {
                    store: next,
                    pending,
                    source: e,
                }));
            }
        }
    }
    if stats.changed() || !compatible {
        next.created_utc = now_utc();
    }
    Ok((next, stats))
}

fn norm(v: &[f32]) -> f64 {
    v.iter()
        .map(|x| (*x as f64) * (*x as f64))
        .sum::<f64>()
        .sqrt()
}

/// Cosine similarity of `query` against a raw vector; 0 when `v` has zero norm.
pub fn cosine(query: &[f32], query_norm: f64, v: &[f32]) -> f64 {
    let vn = norm(v);
    if vn == 0.0 || query_norm == 0.0 {
        return 0.0;
    }
    let dot: f64 = query
        .iter()
        .zip(v)
        .map(|(a, b)| *a as f64 * *b as f64)
        .sum();
    (dot / (query_norm * vn)).clamp(-1.0, 1.0)
}

/// Cosine score of `query` against every stored vector, in store order.
pub fn cosine_scores(query: &[f32], store: &EmbeddingStore) -> Result<Vec<(String, f64)>> {
    if query.len() != store.dim {
        return Err(Error::DimMismatch {
            expected: store.dim,
            got: query.len(),
        });
    }
    let qn = norm(query);
    if qn == 0.0 || !qn.is_finite() {
        return Err(Error::ZeroNormQuery);
    }
    Ok(store
        .iter()
        .map(|(id, sv)| (id.to_string(), cosine(query, qn, &sv.vector)))
        .collect())
}
