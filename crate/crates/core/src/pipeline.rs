//! End-to-end operations behind the command-line tool and query service.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::corpus::{index_repository, IndexReport};
use crate::embed::{embed, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::ingest::BugReport;
use crate::ingest::{build_ground_truth, load_bug_reports, load_commits, CommitRecord, IssueMode};
use crate::metrics::{evaluate, EvalReport};
use crate::negatives::{generate_training_pairs, FileCorpus, TrainingPair};
use crate::rank::{CommitFiles, Granularity, RankedResult, Ranker, Strategy};
use crate::store::{refresh, EmbeddingStore, RefreshStats};

/// Paths inside a store directory.
#[derive(Debug, Clone)]
pub struct StoreLayout {
    root: PathBuf,
}

impl StoreLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        StoreLayout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn segments(&self) -> PathBuf {
        self.root.join("segments")
    }

    pub fn commits(&self) -> PathBuf {
        self.root.join("commits")
    }

    /// Newline-delimited [`CommitRecord`]s, the commit-to-files mapping.
    pub fn commit_records(&self) -> PathBuf {
        self.root.join("commits.jsonl")
    }

    pub fn index_report(&self) -> PathBuf {
        self.root.join("index_report.json")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexSummary {
    pub report: IndexReport,
    pub commits: usize,
    pub segment_stats: RefreshStats,
    pub commit_stats: RefreshStats,
}

impl IndexSummary {
    pub fn re_embedded(&self) -> usize {
        self.segment_stats.re_embedded() + self.commit_stats.re_embedded()
    }
}

fn load_or_empty(dir: &Path, provider: &dyn EmbeddingProvider) -> EmbeddingStore {
    if !dir.join("manifest.json").exists() {
        return EmbeddingStore::new(provider.name(), provider.dim());
    }
    match EmbeddingStore::load(dir) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("discarding unreadable store {}: {e}", dir.display());
            EmbeddingStore::new(provider.name(), provider.dim())
        }
    }
}

fn write_if_changed(path: &Path, bytes: &[u8]) -> Result<()> {
    if fs::read(path).is_ok_and(|old| old == bytes) {
        return Ok(());
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn refresh_and_save(
    dir: &Path,
    items: &[(String, String)],
    provider: &dyn EmbeddingProvider,
    batch_size: usize,
) -> Result<RefreshStats> {
    let old = load_or_empty(dir, provider);
    match refresh(&old, items, provider, batch_size) {
        Ok((next, stats)) => {
            if stats.changed() || next != old || !dir.join("manifest.json").exists() {
                next.save(dir)?;
            }
            Ok(stats)
        }
        Err(failure) => {
            failure.store.save(dir)?;
            log::error!(
                "{} items left to embed in {}; rerun index to resume",
                failure.pending.len(),
                dir.display()
            );
            Err(failure.source)
        }
    }
}

/// Index the repository, read its history and bring both embedding stores
/// up to date. Only new or changed segments and commit messages are embedded.
pub fn run_index(cfg: &Config, provider: &dyn EmbeddingProvider) -> Result<IndexSummary> {
    cfg.validate()?;
    let layout = StoreLayout::new(&cfg.store_dir);
    fs::create_dir_all(layout.root()).map_err(|e| Error::io(layout.root(), e))?;

    let corpus = index_repository(&cfg.repo_root, &cfg.indexer())?;
    let commits = match load_commits(&cfg.repo_root, cfg.commit_limit) {
        Ok(c) => c,
        Err(Error::NotARepository(p)) => {
            log::warn!(
                "{} is not a git repository, indexing without commits",
                p.display()
            );
            Vec::new()
        }
        Err(e) => return Err(e),
    };

    let segment_items: Vec<(String, String)> = corpus
        .segments
        .iter()
        .map(|s| (s.segment_id.clone(), s.text.clone()))
        .collect();
    let commit_items: Vec<(String, String)> = commits
        .iter()
        .filter(|c| !c.message.trim().is_empty())
        .map(|c| (c.commit_id.clone(), c.message.clone()))
        .collect();

    let segment_stats =
        refresh_and_save(&layout.segments(), &segment_items, provider, cfg.batch_size)?;
    let commit_stats =
        refresh_and_save(&layout.commits(), &commit_items, provider, cfg.batch_size)?;

    let mut jsonl = String::new();
    for c in &commits {
        jsonl.push_str(&serde_json::to_string(c).expect("commit serializes"));
        jsonl.push('\n');
    }
    write_if_changed(&layout.commit_records(), jsonl.as_bytes())?;
    let mut report = serde_json::to_vec_pretty(&corpus.report).expect("report serializes");
    report.push(b'\n');
    write_if_changed(&layout.index_report(), &report)?;

    Ok(IndexSummary {
        report: corpus.report,
        commits: commits.len(),
        segment_stats,
        commit_stats,
    })
}

pub fn read_commit_records(path: &Path) -> Result<Vec<CommitRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::json(format!("{} line {}", path.display(), i + 1), &e))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredId {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileHit {
    pub path: String,
    pub count: usize,
    pub best_score: f64,
    pub segments: Vec<String>,
    pub commits: Vec<String>,
}

/// Ranking response shared by the CLI and the HTTP service.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankOutput {
    pub bug_id: String,
    /// `segment`, `commit`, `score_merge` or `file_union`.
    pub strategy: String,
    pub k: usize,
    pub files: Vec<FileHit>,
    pub segments: Vec<ScoredId>,
    pub commits: Vec<ScoredId>,
}

impl RankOutput {
    fn assemble(
        strategy: &str,
        k: usize,
        files: RankedResult,
        segments: Option<RankedResult>,
        commits: Option<RankedResult>,
    ) -> Self {
        let scored = |r: Option<RankedResult>| -> Vec<ScoredId> {
            r.map(|r| {
                r.entries
                    .into_iter()
                    .map(|e| ScoredId {
                        id: e.item_id,
                        score: e.score,
                    })
                    .collect()
            })
            .unwrap_or_default()
        };
        RankOutput {
            bug_id: files.bug_id.clone(),
            strategy: strategy.to_string(),
            k,
            files: files
                .entries
                .into_iter()
                .map(|e| FileHit {
                    path: e.item_id,
                    count: e.count,
                    best_score: e.score,
                    segments: e.segments,
                    commits: e.commits,
                })
                .collect(),
            segments: scored(segments),
            commits: scored(commits),
        }
    }

    pub fn file_paths(&self) -> Vec<String> {
        self.files.iter().map(|f| f.path.clone()).collect()
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("rank output serializes");
        s.push('\n');
        s
    }
}

/// Loaded stores plus the provider that embeds queries.
pub struct Engine {
    pub segments: EmbeddingStore,
    pub commits: EmbeddingStore,
    pub commit_files: CommitFiles,
    provider: Box<dyn EmbeddingProvider>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("segments", &self.segments.len())
            .field("commits", &self.commits.len())
            .field("provider", &self.provider.name())
            .finish()
    }
}

impl Engine {
    pub fn new(
        segments: EmbeddingStore,
        commits: EmbeddingStore,
        commit_records: &[CommitRecord],
        provider: Box<dyn EmbeddingProvider>,
    ) -> Self {
        let commit_files = commit_records
            .iter()
            .map(|c| (c.commit_id.clone(), c.changed_files.clone()))
            .collect();
        Engine {
            segments,
            commits,
            commit_files,
            provider,
        }
    }

    /// Open the stores under `store_dir`. Missing stores load as empty.
    pub fn open(store_dir: &Path, provider: Box<dyn EmbeddingProvider>) -> Result<Self> {
        let layout = StoreLayout::new(store_dir);
        let open = |dir: PathBuf| -> Result<EmbeddingStore> {
            if dir.join("manifest.json").exists() {
                EmbeddingStore::load(&dir)
            } else {
                log::warn!("no store at {}, treating as empty", dir.display());
                Ok(EmbeddingStore::new(provider.name(), provider.dim()))
            }
        };
        let segments = open(layout.segments())?;
        let commits = open(layout.commits())?;
        for s in [&segments, &commits] {
            if !s.is_empty() && (s.dim() != provider.dim() || s.provider() != provider.name()) {
                return Err(Error::Config(format!(
                    "store built with {} (dim {}) but provider is {} (dim {})",
                    s.provider(),
                    s.dim(),
                    provider.name(),
                    provider.dim()
                )));
            }
        }
        let records = if layout.commit_records().exists() {
            read_commit_records(&layout.commit_records())?
        } else {
            Vec::new()
        };
        Ok(Engine::new(segments, commits, &records, provider))
    }

    pub fn provider(&self) -> &dyn EmbeddingProvider {
        self.provider.as_ref()
    }

    pub fn embed_query(&self, text: &str) -> Result<Vec<f32>> {
        let mut v = embed(&[text], self.provider.as_ref())?;
        Ok(v.pop().expect("one vector per text"))
    }

    pub fn ranker(&self) -> Ranker<'_> {
        Ranker::new(&self.segments, &self.commits, &self.commit_files)
    }

    pub fn rank(
        &self,
        bug_id: &str,
        text: &str,
        k: usize,
        strategy: Strategy,
        granularity: Granularity,
    ) -> Result<RankOutput> {
        if text.trim().is_empty() {
            return Err(Error::InvalidArgument("query text is empty".into()));
        }
        if self.segments.is_empty() && self.commits.is_empty() {
            log::warn!("both stores are empty, nothing to rank");
        }
        let q = self.embed_query(text)?;
        let r = self.ranker();
        Ok(match granularity {
            Granularity::Segment => {
                let (segs, files) = r.rank_code_segments(bug_id, &q, k)?;
                RankOutput::assemble("segment", k, files, Some(segs), None)
            }
            Granularity::Commit => {
                let (commits, files) = r.rank_commits(bug_id, &q, k)?;
                RankOutput::assemble("commit", k, files, None, Some(commits))
            }
            Granularity::File => {
                let c = r.rank_combined(bug_id, &q, k, strategy)?;
                RankOutput::assemble(
                    strategy.as_str(),
                    k,
                    c.files,
                    Some(c.segments),
                    Some(c.commits),
                )
            }
        })
    }
}

/// Load ground truth for `export` against the repository history.
pub fn load_ground_truth(cfg: &Config, export: &Path) -> Result<Vec<BugReport>> {
    let reports = load_bug_reports(export, &cfg.bug_labels, IssueMode::GroundTruth)?;
    let commits = match load_commits(&cfg.repo_root, None) {
        Ok(c) => c,
        Err(e) => {
            let stored = StoreLayout::new(&cfg.store_dir).commit_records();
            log::warn!("cannot read history ({e}), using {}", stored.display());
            read_commit_records(&stored)?
        }
    };
    Ok(build_ground_truth(reports, &commits))
}

/// Rank every ground-truth report and score the file lists.
///
/// The ranking depth is `max(k, largest cutoff)` so every Acc@N is measurable.
pub fn run_eval(
    engine: &Engine,
    reports: &[BugReport],
    k: usize,
    k_list: &[usize],
    strategy: Strategy,
    granularity: Granularity,
) -> Result<EvalReport> {
    let depth = k_list.iter().copied().chain([k]).max().unwrap_or(k);
    evaluate(
        reports,
        |r| {
            Ok(engine
                .rank(&r.bug_id, &r.query_text, depth, strategy, granularity)?
                .file_paths())
        },
        k_list,
    )
}

/// Index the repository's files and mine negatives for `positives`.
pub fn run_gen_negatives(
    cfg: &Config,
    provider: &dyn EmbeddingProvider,
    positives: &[(BugReport, String)],
) -> Result<Vec<TrainingPair>> {
    cfg.validate()?;
    let corpus = index_repository(&cfg.repo_root, &cfg.indexer())?;
    let files = FileCorpus::build(&corpus.files, &cfg.indexer(), provider)?;
    generate_training_pairs(positives, &files, cfg.top_n)
}

/// Positives derived from ground truth: one per (report, ground-truth file).
pub fn positives_from_ground_truth(reports: &[BugReport]) -> Vec<(BugReport, String)> {
    reports
        .iter()
        .flat_map(|r| {
            r.ground_truth_files
                .iter()
                .map(move |f| (r.clone(), f.clone()))
        })
        .collect()
}

/// Body of a `POST /rank` request.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankRequest {
    pub text: String,
    #[serde(default)]
    pub bug_id: Option<String>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub strategy: Option<Strategy>,
    #[serde(default)]
    pub granularity: Option<Granularity>,
}

pub const ADHOC_BUG_ID: &str = "query";

pub fn parse_rank_request(body: &[u8]) -> Result<RankRequest> {
    let req: RankRequest =
        serde_json::from_slice(body).map_err(|e| Error::json("rank request", &e))?;
    if req.text.trim().is_empty() {
        return Err(Error::InvalidArgument("text must not be empty".into()));
    }
    if req.k == Some(0) {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    Ok(req)
}
