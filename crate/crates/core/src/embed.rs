//! Embedding providers.
//!
//! [`HashingProvider`] is a model-free bag-of-subtokens embedder used by the
//! test suite and for offline runs. [`RemoteProvider`] talks to an HTTP model
//! server with a tiny JSON protocol:
//!
//! ```text
//! POST {url}/embed   {"texts": ["..", ..]}
//! 200                {"embeddings": [[f, ..], ..], "dim": n}
//! ```

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenize::{tokenize, TokenKind};

pub const DEFAULT_TEST_DIM: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    RemoteHttp,
    DeterministicTest,
}

pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn kind(&self) -> ProviderKind;

    /// Embed one batch. Implementations return a plain message on failure;
    /// [`embed_batch`] wraps it with the provider and batch identity.
    fn embed_raw(&self, texts: &[&str]) -> std::result::Result<Vec<Vec<f32>>, String>;
}

/// Embed `texts` as a single batch and validate the provider's answer.
pub fn embed(texts: &[&str], provider: &dyn EmbeddingProvider) -> Result<Vec<Vec<f32>>> {
    embed_batch(texts, provider, 0)
}

pub(crate) fn embed_batch(
    texts: &[&str],
    provider: &dyn EmbeddingProvider,
    batch: usize,
) -> Result<Vec<Vec<f32>>> {
    if let Some(pos) = texts.iter().position(|t| t.is_empty()) {
        return Err(Error::EmptyText(format!("batch {batch}, position {pos}")));
    }
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    let fail = |message: String| Error::Provider {
        provider: provider.name().to_string(),
        batch,
        message,
    };
    let vectors = provider.embed_raw(texts).map_err(fail)?;
    if vectors.len() != texts.len() {
        return Err(fail(format!(
            "returned {} vectors for {} texts",
            vectors.len(),
            texts.len()
        )));
    }
    for v in &vectors {
        if v.len() != provider.dim() {
            return Err(Error::DimMismatch {
                expected: provider.dim(),
                got: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(fail("non-finite component in embedding".into()));
        }
    }
    Ok(vectors)
}

/// Hashed bag of lower-cased words and subwords, signed, L2-normalized.
///
/// Token order does not matter; text with no word tokens maps to the zero
/// vector.
#[derive(Debug, Clone)]
pub struct HashingProvider {
    dim: usize,
}

impl HashingProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "dim must be positive");
        HashingProvider { dim }
    }

    pub fn embed_one(&self, text: &str) -> Vec<f32> {
        let mut acc = vec![0f64; self.dim];
        for tok in tokenize(text) {
            if tok.kind == TokenKind::Punct {
                continue;
            }
            let (slot, sign) = hash_feature(&tok.text.to_lowercase(), self.dim);
            acc[slot] += sign;
        }
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return vec![0.0; self.dim];
        }
        acc.iter().map(|x| (x / norm) as f32).collect()
    }
}

impl Default for HashingProvider {
    fn default() -> Self {
        HashingProvider::new(DEFAULT_TEST_DIM)
    }
}

/// Bucket and sign for one feature string.
pub fn hash_feature(feature: &str, dim: usize) -> (usize, f64) {
    let h = xxhash_rust::xxh3::xxh3_64(feature.as_bytes());
    let slot = (h % dim as u64) as usize;
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    (slot, sign)
}

impl EmbeddingProvider for HashingProvider {
    fn name(&self) -> &str {
        "deterministic_test"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn kind(&self) -> ProviderKind {
        ProviderKind::DeterministicTest
    }

    fn embed_raw(&self, texts: &[&str]) -> std::result::Result<Vec<Vec<f32>>, String> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f32>>,
    dim: usize,
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(250),
            max_delay: Duration::from_secs(4),
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Client for an HTTP embedding server.
#[derive(Debug)]
pub struct RemoteProvider {
    endpoint: String,
    dim: usize,
    retry: RetryPolicy,
    agent: ureq::Agent,
}

impl RemoteProvider {
    pub fn new(base_url: &str, dim: usize) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build();
        RemoteProvider {
            endpoint: format!("{}/embed", base_url.trim_end_matches('/')),
            dim,
            retry: RetryPolicy::default(),
            agent: config.into(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn call(&self, texts: &[&str]) -> std::result::Result<Vec<Vec<f32>>, String> {
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(EmbedRequest { texts })
            .map_err(|e| e.to_string())?;
        let body: EmbedResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| format!("bad response body: {e}"))?;
        if body.dim != self.dim {
            return Err(format!(
                "server reports dim {}, configured {}",
                body.dim, self.dim
            ));
        }
        Ok(body.embeddings)
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn name(&self) -> &str {
        "remote_http"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn kind(&self) -> ProviderKind {
        ProviderKind::RemoteHttp
    }

    fn embed_raw(&self, texts: &[&str]) -> std::result::Result<Vec<Vec<f32>>, String> {
        let mut last = String::new();
        for attempt in 0..self.retry.attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(self.retry.delay(attempt - 1));
            }
            match self.call(texts) {
                Ok(v) => return Ok(v),
                Err(e) => {
                    log::warn!("embedding request failed (attempt {}): {e}", attempt + 1);
                    last = e;
                }
            }
        }
        Err(format!(
            "{} attempts failed, last error: {last}",
            self.retry.attempts.max(1)
        ))
    }
}
