//! Configuration file (TOML, or JSON when the file ends in `.json`).
//!
//! ```toml
//! repo_root = "."
//! store_dir = ".bugloc"
//! issue_export_path = "issues.json"
//! k = 10
//! strategy = "score_merge"
//!
//! [provider]
//! kind = "deterministic_test"
//! dim = 256
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{IndexerConfig, DEFAULT_SEG_LEN};
use crate::embed::{
    EmbeddingProvider, HashingProvider, ProviderKind, RemoteProvider, DEFAULT_TEST_DIM,
};
use crate::error::{Error, Result};
use crate::ingest::default_bug_labels;
use crate::negatives::DEFAULT_TOP_N;
use crate::prefix::PrefixMode;
use crate::rank::{Strategy, DEFAULT_K};
use crate::store::DEFAULT_BATCH_SIZE;
use crate::tokenize::TokenizerKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default)]
    pub url: Option<String>,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

fn default_dim() -> usize {
    DEFAULT_TEST_DIM
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: ProviderKind::DeterministicTest,
            url: None,
            dim: DEFAULT_TEST_DIM,
        }
    }
}

impl ProviderConfig {
    pub fn build(&self) -> Result<Box<dyn EmbeddingProvider>> {
        if self.dim == 0 {
            return Err(Error::Config("provider.dim must be positive".into()));
        }
        match self.kind {
            ProviderKind::DeterministicTest => Ok(Box::new(HashingProvider::new(self.dim))),
            ProviderKind::RemoteHttp => {
                let url = self.url.as_deref().ok_or_else(|| {
                    Error::Config("provider.url is required for remote_http".into())
                })?;
                Ok(Box::new(RemoteProvider::new(url, self.dim)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub repo_root: PathBuf,
    pub store_dir: PathBuf,
    #[serde(default)]
    pub issue_export_path: Option<PathBuf>,
    #[serde(default)]
    pub provider: ProviderConfig,
    #[serde(default = "default_seg_len")]
    pub seg_len: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default = "default_bug_labels")]
    pub bug_labels: Vec<String>,
    #[serde(default = "default_top_n")]
    pub top_n: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub prefix_mode: PrefixMode,
    #[serde(default)]
    pub tokenizer: TokenizerKind,
    #[serde(default)]
    pub include_globs: Vec<String>,
    #[serde(default)]
    pub exclude_globs: Vec<String>,
    #[serde(default)]
    pub commit_limit: Option<usize>,
}

fn default_seg_len() -> usize {
    DEFAULT_SEG_LEN
}
fn default_k() -> usize {
    DEFAULT_K
}
fn default_top_n() -> usize {
    DEFAULT_TOP_N
}
fn default_batch_size() -> usize {
    DEFAULT_BATCH_SIZE
}

impl Config {
    /// Defaults for everything except the two required paths.
    pub fn new(repo_root: impl Into<PathBuf>, store_dir: impl Into<PathBuf>) -> Self {
        Config {
            repo_root: repo_root.into(),
            store_dir: store_dir.into(),
            issue_export_path: None,
            provider: ProviderConfig::default(),
            seg_len: DEFAULT_SEG_LEN,
            k: DEFAULT_K,
            strategy: Strategy::default(),
            bug_labels: default_bug_labels(),
            top_n: DEFAULT_TOP_N,
            batch_size: DEFAULT_BATCH_SIZE,
            prefix_mode: PrefixMode::default(),
            tokenizer: TokenizerKind::default(),
            include_globs: Vec::new(),
            exclude_globs: Vec::new(),
            commit_limit: None,
        }
    }

    /// Parse config text. `json` selects JSON instead of TOML.
    pub fn parse(text: &str, json: bool) -> Result<Self> {
        if json {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg = Self::parse(&text, json).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(base) = path.parent() {
            cfg.resolve_relative_to(base);
        }
        Ok(cfg)
    }

    pub fn resolve_relative_to(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.repo_root);
        fix(&mut self.store_dir);
        if let Some(p) = self.issue_export_path.as_mut() {
            fix(p);
        }
    }

    /// Check value ranges and that referenced inputs exist.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.top_n == 0 {
            return Err(Error::Config("top_n must be at least 1".into()));
        }
        if self.seg_len == 0 {
            return Err(Error::Config("seg_len must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !self.repo_root.is_dir() {
            return Err(Error::Config(format!(
                "repo_root {} does not exist",
                self.repo_root.display()
            )));
        }
        if let Some(p) = &self.issue_export_path {
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "issue_export_path {} does not exist",
                    p.display()
                )));
            }
        }
        if self.provider.kind == ProviderKind::RemoteHttp && self.provider.url.is_none() {
            return Err(Error::Config(
                "provider.url is required for remote_http".into(),
            ));
        }
        Ok(())
    }

    pub fn indexer(&self) -> IndexerConfig {
        IndexerConfig {
            seg_len: self.seg_len,
            include_globs: self.include_globs.clone(),
            exclude_globs: self.exclude_globs.clone(),
            prefix_mode: self.prefix_mode,
            tokenizer: self.tokenizer,
        }
    }
}
