//! Walking a source tree and splitting files into prefixed code segments.

use std::fs;
use std::io::Read;
use std::path::Path;

use globset::{Glob, GlobSet, GlobSetBuilder};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::prefix::{extract_prefix, PrefixMode};
use crate::tokenize::{detokenize, Token, TokenizerKind};

pub const DEFAULT_SEG_LEN: usize = 512;

/// Bytes inspected for a NUL when deciding whether a file is binary.
const BINARY_SNIFF_LEN: usize = 8 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanguageHint {
    Java,
    CCpp,
    Go,
    Other,
}

impl LanguageHint {
    pub fn from_path(path: &str) -> Self {
        let ext = path.rsplit_once('.').map(|(_, e)| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("java") => LanguageHint::Java,
            Some("c" | "h" | "cc" | "cpp" | "cxx" | "hpp" | "hh" | "hxx") => LanguageHint::CCpp,
            Some("go") => LanguageHint::Go,
            _ => LanguageHint::Other,
        }
    }
}

/// Stable 64-bit content hash used for change detection.
pub fn content_hash(text: &str) -> u64 {
    xxhash_rust::xxh3::xxh3_64(text.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    /// Repository-relative, `/`-separated.
    pub path: String,
    pub content: String,
    pub content_hash: u64,
    pub language_hint: LanguageHint,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, content: impl Into<String>) -> Self {
        let path = path.into();
        let content = content.into();
        SourceFile {
            content_hash: content_hash(&content),
            language_hint: LanguageHint::from_path(&path),
            path,
            content,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSegment {
    /// `path#index`
    pub segment_id: String,
    pub file_path: String,
    pub index: usize,
    pub prefix: String,
    pub body_tokens: Vec<Token>,
    /// Prefix, a newline, then the detokenized body. This is what gets embedded.
    pub text: String,
}

pub fn segment_id(path: &str, index: usize) -> String {
    format!("{path}#{index}")
}

/// File path of a `path#index` segment id.
pub fn segment_file_path(segment_id: &str) -> &str {
    segment_id
        .rsplit_once('#')
        .map_or(segment_id, |(path, _)| path)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndexerConfig {
    pub seg_len: usize,
    pub include_globs: Vec<String>,
    pub exclude_globs: Vec<String>,
    pub prefix_mode: PrefixMode,
    pub tokenizer: TokenizerKind,
}

impl Default for IndexerConfig {
    fn default() -> Self {
        IndexerConfig {
            seg_len: DEFAULT_SEG_LEN,
            include_globs: Vec::new(),
            exclude_globs: Vec::new(),
            prefix_mode: PrefixMode::Declarations,
            tokenizer: TokenizerKind::Identifier,
        }
    }
}

impl IndexerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seg_len == 0 {
            return Err(Error::Config("seg_len must be at least 1".into()));
        }
        Ok(())
    }
}

fn render_segment_text(prefix: &str, body: &[Token]) -> String {
    let body = detokenize(body);
    if prefix.is_empty() {
        body
    } else {
        format!("{prefix}\n{body}")
    }
}

/// Split `file` into consecutive windows of at most `cfg.seg_len` tokens.
///
/// The prefix is not counted against the token budget.
pub fn segment_file(file: &SourceFile, cfg: &IndexerConfig) -> Vec<CodeSegment> {
    assert!(cfg.seg_len >= 1, "seg_len must be positive");
    let tokens = cfg.tokenizer.build().tokenize(&file.content);
    if tokens.is_empty() {
        return Vec::new();
    }
    let prefix = extract_prefix(file, cfg.prefix_mode);
    tokens
        .chunks(cfg.seg_len)
        .enumerate()
        .map(|(index, body)| CodeSegment {
            segment_id: segment_id(&file.path, index),
            file_path: file.path.clone(),
            index,
            text: render_segment_text(&prefix, body),
            prefix: prefix.clone(),
            body_tokens: body.to_vec(),
        })
        .collect()
}

/// Text used when a whole file must be embedded as one item: the file's first
/// `seg_len` tokens with the usual prefix.
pub fn truncated_file_text(file: &SourceFile, cfg: &IndexerConfig) -> String {
    let tokens = cfg.tokenizer.build().tokenize(&file.content);
    let prefix = extract_prefix(file, cfg.prefix_mode);
    let head = &tokens[..tokens.len().min(cfg.seg_len)];
    render_segment_text(&prefix, head)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexReport {
    pub files: usize,
    pub segments: usize,
    pub skipped: Vec<String>,
    pub seg_len: usize,
    pub prefix_mode: PrefixMode,
}

#[derive(Debug, Clone)]
pub struct IndexedCorpus {
    pub files: Vec<SourceFile>,
    pub segments: Vec<CodeSegment>,
    pub report: IndexReport,
}

struct PathFilter {
    include: Option<GlobSet>,
    exclude: GlobSet,
}

fn build_globset(patterns: &[String]) -> Result<GlobSet> {
    let mut b = GlobSetBuilder::new();
    for p in patterns {
        let g = Glob::new(p).map_err(|e| Error::Glob {
            pattern: p.clone(),
            message: e.to_string(),
        })?;
        b.add(g);
    }
    b.build().map_err(|e| Error::Glob {
        pattern: patterns.join(","),
        message: e.to_string(),
    })
}

impl PathFilter {
    fn new(cfg: &IndexerConfig) -> Result<Self> {
        let include = if cfg.include_globs.is_empty() {
            None
        } else {
            Some(build_globset(&cfg.include_globs)?)
        };
        Ok(PathFilter {
            include,
            exclude: build_globset(&cfg.exclude_globs)?,
        })
    }

    fn accepts(&self, rel: &str) -> bool {
        if self.exclude.is_match(rel) {
            return false;
        }
        self.include.as_ref().is_none_or(|inc| inc.is_match(rel))
    }
}

enum Loaded {
    Text(SourceFile),
    Binary,
    Failed(String),
}

fn load_file(abs: &Path, rel: String) -> Loaded {
    let mut bytes = Vec::new();
    if let Err(e) = fs::File::open(abs).and_then(|mut f| f.read_to_end(&mut bytes)) {
        return Loaded::Failed(e.to_string());
    }
    let sniff = &bytes[..bytes.len().min(BINARY_SNIFF_LEN)];
    if sniff.contains(&0) {
        return Loaded::Binary;
    }
    let content = String::from_utf8_lossy(&bytes).into_owned();
    Loaded::Text(SourceFile::new(rel, content))
}

fn relative_path(root: &Path, abs: &Path) -> String {
    let rel = abs.strip_prefix(root).unwrap_or(abs);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Walk `root`, read every accepted text file and segment it.
///
/// Output order is lexicographic by path, then segment index, regardless of
/// how the per-file work is scheduled.
pub fn index_repository(root: &Path, cfg: &IndexerConfig) -> Result<IndexedCorpus> {
    cfg.validate()?;
    let meta = fs::metadata(root).map_err(|e| Error::io(root, e))?;
    if !meta.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotADirectory, "not a directory"),
        ));
    }
    fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let filter = PathFilter::new(cfg)?;

    let mut skipped = Vec::new();
    let mut candidates = Vec::new();
    let walker = WalkDir::new(root)
        .follow_links(false)
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || e.file_name() != ".git");
    for entry in walker {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                let p = e.path().map(|p| relative_path(root, p)).unwrap_or_default();
                log::warn!("skipping unreadable entry {p}: {e}");
                skipped.push(p);
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = relative_path(root, entry.path());
        if filter.accepts(&rel) {
            candidates.push((entry.into_path(), rel));
        }
    }
    candidates.sort_by(|a, b| a.1.cmp(&b.1));

    let loaded: Vec<(String, Loaded)> = candidates
        .into_par_iter()
        .map(|(abs, rel)| (rel.clone(), load_file(&abs, rel)))
        .collect();

    let mut files = Vec::new();
    for (rel, l) in loaded {
        match l {
            Loaded::Text(f) => files.push(f),
            Loaded::Binary => {
                log::debug!("skipping binary file {rel}");
                skipped.push(rel);
            }
            Loaded::Failed(msg) => {
                log::warn!("skipping unreadable file {rel}: {msg}");
                skipped.push(rel);
            }
        }
    }
    skipped.sort();

    let segments: Vec<CodeSegment> = files
        .par_iter()
        .map(|f| segment_file(f, cfg))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    let report = IndexReport {
        files: files.len(),
        segments: segments.len(),
        skipped,
        seg_len: cfg.seg_len,
        prefix_mode: cfg.prefix_mode,
    };
    Ok(IndexedCorpus {
        files,
        segments,
        report,
    })
}
