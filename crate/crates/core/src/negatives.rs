//! Training-pair generation with similarity-mined negatives.
//!
//! For every positive (bug report, file) pair, the files most similar to the
//! positive file under a base embedder become that report's negatives.
//! Files are compared through whole-file embeddings of their first
//! `seg_len` tokens.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{truncated_file_text, IndexerConfig, SourceFile};
use crate::embed::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::ingest::BugReport;
use crate::rank::top_k;
use crate::store::{build_store, EmbeddingStore, DEFAULT_BATCH_SIZE};

pub const DEFAULT_TOP_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSource {
    GroundTruth,
    SimilarityNegative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub bug_id: String,
    pub report_text: String,
    pub file_path: String,
    pub label: u8,
    pub source: PairSource,
}

/// Whole-file embeddings keyed by path.
#[derive(Debug, Clone)]
pub struct FileCorpus {
    store: EmbeddingStore,
}

impl FileCorpus {
    pub fn build(
        files: &[SourceFile],
        cfg: &IndexerConfig,
        provider: &dyn EmbeddingProvider,
    ) -> Result<Self> {
        let items: Vec<(String, String)> = files
            .iter()
            .filter_map(|f| {
                let text = truncated_file_text(f, cfg);
                if text.is_empty() {
                    log::warn!("{} has no content to embed, left out of the corpus", f.path);
                    None
                } else {
                    Some((f.path.clone(), text))
                }
            })
            .collect();
        let store = build_store(&items, provider, DEFAULT_BATCH_SIZE).map_err(|f| f.source)?;
        Ok(FileCorpus { store })
    }

    pub fn from_store(store: EmbeddingStore) -> Self {
        FileCorpus { store }
    }

    pub fn store(&self) -> &EmbeddingStore {
        &self.store
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    pub fn contains(&self, path: &str) -> bool {
        self.store.contains(path)
    }

    /// The `top_n` files most similar to `path`, excluding `path` itself.
    pub fn top_similar_files(&self, path: &str, top_n: usize) -> Result<Vec<(String, f64)>> {
        if top_n == 0 {
            return Err(Error::InvalidArgument("top_n must be at least 1".into()));
        }
        let query = self
            .store
            .get(path)
            .ok_or_else(|| Error::InvalidArgument(format!("{path} is not in the corpus")))?;
        if self.store.len() == 1 {
            log::warn!("corpus holds only {path}, no similar files");
            return Ok(Vec::new());
        }
        let ranked = match top_k(&query.vector, &self.store, top_n + 1) {
            Ok(r) => r,
            Err(Error::ZeroNormQuery) => {
                log::warn!("{path} embeds to the zero vector, no similar files");
                return Ok(Vec::new());
            }
            Err(e) => return Err(e),
        };
        Ok(ranked
            .into_iter()
            .filter(|(p, _)| p != path)
            .take(top_n)
            .collect())
    }
}

/// One positive pair per input plus up to `top_n` mined negatives each.
///
/// Negatives that are ground truth for the same bug are dropped, as are
/// repeats of an already emitted (bug, file, label). Positives whose file is
/// missing from the corpus are skipped with a warning.
pub fn generate_training_pairs(
    positives: &[(BugReport, String)],
    corpus: &FileCorpus,
    top_n: usize,
) -> Result<Vec<TrainingPair>> {
    if top_n == 0 {
        return Err(Error::InvalidArgument("top_n must be at least 1".into()));
    }
    let mut truth: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (report, file) in positives {
        let set = truth.entry(report.bug_id.as_str()).or_default();
        set.insert(file.as_str());
        set.extend(report.ground_truth_files.iter().map(String::as_str));
    }

    let neighbours: Vec<Option<Vec<(String, f64)>>> = positives
        .par_iter()
        .map(|(_, file)| {
            if corpus.contains(file) {
                corpus.top_similar_files(file, top_n).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;

    let mut seen: HashSet<(String, String, u8)> = HashSet::new();
    let mut pairs = Vec::new();
    for ((report, file), similar) in positives.iter().zip(neighbours) {
        let Some(similar) = similar else {
            log::warn!(
                "bug {}: {file} not in corpus, positive skipped",
                report.bug_id
            );
            continue;
        };
        let mut emit = |path: &str, label: u8, source: PairSource| {
            if seen.insert((report.bug_id.clone(), path.to_string(), label)) {
                pairs.push(TrainingPair {
                    bug_id: report.bug_id.clone(),
                    report_text: report.query_text.clone(),
                    file_path: path.to_string(),
                    label,
                    source,
                });
            }
        };
        emit(file, 1, PairSource::GroundTruth);
        let gt = &truth[report.bug_id.as_str()];
        for (neg, _) in similar {
            if gt.contains(neg.as_str()) {
                log::debug!(
                    "bug {}: dropping negative {neg}, it is ground truth",
                    report.bug_id
                );
                continue;
            }
            emit(&neg, 0, PairSource::SimilarityNegative);
        }
    }
    Ok(pairs)
}

/// One line of a positives file.
#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct PositiveRecord {
    pub bug_id: String,
    pub report_text: String,
    pub file_path: String,
}

/// Parse newline-delimited `{bug_id, report_text, file_path}` records.
pub fn parse_positives(jsonl: &str) -> Result<Vec<(BugReport, String)>> {
    let mut out = Vec::new();
    for (i, line) in jsonl.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: PositiveRecord = serde_json::from_str(line)
            .map_err(|e| Error::json(format!("positives line {}", i + 1), &e))?;
        if rec.report_text.is_empty() {
            log::warn!("positives line {}: empty report text, skipped", i + 1);
            continue;
        }
        out.push((
            BugReport::from_text(rec.bug_id, rec.report_text),
            rec.file_path,
        ));
    }
    Ok(out)
}

/// Serialize pairs as newline-delimited JSON.
pub fn to_jsonl(pairs: &[TrainingPair]) -> String {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&serde_json::to_string(p).expect("pair serializes"));
        out.push('\n');
    }
    out
}
