//! Segment-level, commit-level and combined file ranking.
//!
//! Every ordering here is total: scores descending, then the documented
//! tie-breaks, ending in ascending id. Identical inputs always produce
//! identical output.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::segment_file_path;
use crate::error::{Error, Result};
use crate::store::{cosine_scores, EmbeddingStore};

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Merge top-k segments and top-k commits by score, keep the best k items,
    /// then rank their files by occurrence.
    #[default]
    ScoreMerge,
    /// Concatenate the segment-derived and commit-derived file lists and rank
    /// by occurrence.
    FileUnion,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::ScoreMerge => "score_merge",
            Strategy::FileUnion => "file_union",
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "score_merge" => Ok(Strategy::ScoreMerge),
            "file_union" => Ok(Strategy::FileUnion),
            other => Err(Error::InvalidArgument(format!(
                "unknown strategy {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Segment,
    Commit,
    #[default]
    File,
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "segment" => Ok(Granularity::Segment),
            "commit" => Ok(Granularity::Commit),
            "file" => Ok(Granularity::File),
            other => Err(Error::InvalidArgument(format!(
                "unknown granularity {other:?}"
            ))),
        }
    }
}

/// One row of a [`RankedResult`].
///
/// For segment and commit rows `count` is 1 and the evidence lists are empty.
/// For file rows `score` is the best contributing score and the evidence lists
/// name the ranked segments and commits that map to the file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedEntry {
    pub item_id: String,
    pub score: f64,
    pub count: usize,
    pub segments: Vec<String>,
    pub commits: Vec<String>,
}

impl RankedEntry {
    fn item(id: String, score: f64) -> Self {
        RankedEntry {
            item_id: id,
            score,
            count: 1,
            segments: Vec::new(),
            commits: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedResult {
    pub bug_id: String,
    pub granularity: Granularity,
    pub entries: Vec<RankedEntry>,
}

impl RankedResult {
    fn empty(bug_id: &str, granularity: Granularity) -> Self {
        RankedResult {
            bug_id: bug_id.to_string(),
            granularity,
            entries: Vec::new(),
        }
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.item_id.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemCount {
    pub item: String,
    pub count: usize,
    pub best_score: f64,
}

/// Occurrence counter with score-aware, total tie-breaking.
#[derive(Debug, Default, Clone)]
pub struct OccurrenceCounter {
    counts: HashMap<String, (usize, f64)>,
}

impl OccurrenceCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, item: &str, score: f64) {
        self.add_n(item, 1, score);
    }

    fn add_n(&mut self, item: &str, n: usize, score: f64) {
        match self.counts.get_mut(item) {
            Some((c, best)) => {
                *c += n;
                if score > *best {
                    *best = score;
                }
            }
            None => {
                self.counts.insert(item.to_string(), (n, score));
            }
        }
    }

    /// Count descending, then best score descending, then item ascending.
    pub fn most_common(&self) -> Vec<ItemCount> {
        let mut out: Vec<ItemCount> = self
            .counts
            .iter()
            .map(|(item, &(count, best_score))| ItemCount {
                item: item.clone(),
                count,
                best_score,
            })
            .collect();
        out.sort_by(compare_counts);
        out
    }
}

fn compare_counts(a: &ItemCount, b: &ItemCount) -> Ordering {
    b.count
        .cmp(&a.count)
        .then_with(|| b.best_score.total_cmp(&a.best_score))
        .then_with(|| a.item.cmp(&b.item))
}

pub fn most_common(items: &[(String, f64)]) -> Vec<ItemCount> {
    let mut c = OccurrenceCounter::new();
    for (item, score) in items {
        c.add(item, *score);
    }
    c.most_common()
}

fn by_score_then_id(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// The `k` best-scoring items of `store` against `query`.
pub fn top_k(query: &[f32], store: &EmbeddingStore, k: usize) -> Result<Vec<(String, f64)>> {
    let mut scores = cosine_scores(query, store)?;
    scores.sort_by(by_score_then_id);
    scores.truncate(k);
    Ok(scores)
}

/// Changed files per commit id.
pub type CommitFiles = HashMap<String, BTreeSet<String>>;

/// Rankers over one pair of embedding stores.
///
/// Segments map to files through their `path#index` ids; commits map to
/// files through `commit_files`.
#[derive(Debug, Clone, Copy)]
pub struct Ranker<'a> {
    pub segments: &'a EmbeddingStore,
    pub commits: &'a EmbeddingStore,
    pub commit_files: &'a CommitFiles,
}

/// Output of the combined ranking: the file list plus the per-strategy item
/// lists it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedRanking {
    pub files: RankedResult,
    pub segments: RankedResult,
    pub commits: RankedResult,
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    Ok(())
}

impl<'a> Ranker<'a> {
    pub fn new(
        segments: &'a EmbeddingStore,
        commits: &'a EmbeddingStore,
        commit_files: &'a CommitFiles,
    ) -> Self {
        Ranker {
            segments,
            commits,
            commit_files,
        }
    }

    fn files_of_commit(&self, id: &str) -> impl Iterator<Item = &'a String> {
        self.commit_files.get(id).into_iter().flatten()
    }

    /// Top-k segments, and their files ranked by occurrence among them.
    pub fn rank_code_segments(
        &self,
        bug_id: &str,
        query: &[f32],
        k: usize,
    ) -> Result<(RankedResult, RankedResult)> {
        check_k(k)?;
        if self.segments.is_empty() {
            log::warn!("segment store is empty, no segment ranking for {bug_id}");
            return Ok((
                RankedResult::empty(bug_id, Granularity::Segment),
                RankedResult::empty(bug_id, Granularity::File),
            ));
        }
        let top = top_k(query, self.segments, k)?;
        let mut counter = OccurrenceCounter::new();
        for (id, score) in &top {
            counter.add(segment_file_path(id), *score);
        }
        let mut files = self.file_result(bug_id, counter.most_common(), k);
        attach_evidence(&mut files, &top, &[], self);
        Ok((item_result(bug_id, Granularity::Segment, top), files))
    }

    /// Top-k commits, and their changed files ranked by occurrence.
    pub fn rank_commits(
        &self,
        bug_id: &str,
        query: &[f32],
        k: usize,
    ) -> Result<(RankedResult, RankedResult)> {
        check_k(k)?;
        if self.commits.is_empty() {
            log::warn!("commit store is empty, no commit ranking for {bug_id}");
            return Ok((
                RankedResult::empty(bug_id, Granularity::Commit),
                RankedResult::empty(bug_id, Granularity::File),
            ));
        }
        let top = top_k(query, self.commits, k)?;
        let mut counter = OccurrenceCounter::new();
        for (id, score) in &top {
            for f in self.files_of_commit(id) {
                counter.add(f, *score);
            }
        }
        let mut files = self.file_result(bug_id, counter.most_common(), k);
        attach_evidence(&mut files, &[], &top, self);
        Ok((item_result(bug_id, Granularity::Commit, top), files))
    }

    /// File ranking combining segment and commit evidence.
    ///
    /// When one of the stores is empty this degrades to the other store's
    /// file ranking. Evidence lists on the returned files are drawn from the
    /// top-k segment and commit lists.
    pub fn rank_combined(
        &self,
        bug_id: &str,
        query: &[f32],
        k: usize,
        strategy: Strategy,
    ) -> Result<CombinedRanking> {
        check_k(k)?;
        let (segs, seg_files) = self.rank_code_segments(bug_id, query, k)?;
        let (commits, commit_files) = self.rank_commits(bug_id, query, k)?;

        let files = if self.commits.is_empty() {
            log::warn!("falling back to segment-only ranking for {bug_id}");
            seg_files
        } else if self.segments.is_empty() {
            log::warn!("falling back to commit-only ranking for {bug_id}");
            commit_files
        } else {
            let counts = match strategy {
                Strategy::ScoreMerge => self.score_merge_counts(&segs, &commits, k),
                Strategy::FileUnion => {
                    let mut c = OccurrenceCounter::new();
                    for e in seg_files.entries.iter().chain(&commit_files.entries) {
                        c.add(&e.item_id, e.score);
                    }
                    c.most_common()
                }
            };
            let mut files = self.file_result(bug_id, counts, k);
            attach_evidence(&mut files, &pairs(&segs), &pairs(&commits), self);
            files
        };
        Ok(CombinedRanking {
            files,
            segments: segs,
            commits,
        })
    }

    fn score_merge_counts(
        &self,
        segs: &RankedResult,
        commits: &RankedResult,
        k: usize,
    ) -> Vec<ItemCount> {
        // (score, is_commit, id); segments win exact score ties, then id order
        let mut merged: Vec<(f64, bool, &str)> = segs
            .entries
            .iter()
            .map(|e| (e.score, false, e.item_id.as_str()))
            .chain(
                commits
                    .entries
                    .iter()
                    .map(|e| (e.score, true, e.item_id.as_str())),
            )
            .collect();
        merged.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| a.1.cmp(&b.1))
                .then_with(|| a.2.cmp(b.2))
        });
        merged.truncate(k);
        let mut counter = OccurrenceCounter::new();
        for (score, is_commit, id) in merged {
            if is_commit {
                for f in self.files_of_commit(id) {
                    counter.add(f, score);
                }
            } else {
                counter.add(segment_file_path(id), score);
            }
        }
        counter.most_common()
    }

    fn file_result(&self, bug_id: &str, counts: Vec<ItemCount>, k: usize) -> RankedResult {
        RankedResult {
            bug_id: bug_id.to_string(),
            granularity: Granularity::File,
            entries: counts
                .into_iter()
                .take(k)
                .map(|c| RankedEntry {
                    item_id: c.item,
                    score: c.best_score,
                    count: c.count,
                    segments: Vec::new(),
                    commits: Vec::new(),
                })
                .collect(),
        }
    }
}

fn pairs(r: &RankedResult) -> Vec<(String, f64)> {
    r.entries
        .iter()
        .map(|e| (e.item_id.clone(), e.score))
        .collect()
}

fn item_result(bug_id: &str, granularity: Granularity, top: Vec<(String, f64)>) -> RankedResult {
    RankedResult {
        bug_id: bug_id.to_string(),
        granularity,
        entries: top
            .into_iter()
            .map(|(id, s)| RankedEntry::item(id, s))
            .collect(),
    }
}

fn attach_evidence(
    files: &mut RankedResult,
    segs: &[(String, f64)],
    commits: &[(String, f64)],
    ranker: &Ranker<'_>,
) {
    for entry in &mut files.entries {
        entry.segments = segs
            .iter()
            .filter(|(id, _)| segment_file_path(id) == entry.item_id)
            .map(|(id, _)| id.clone())
            .collect();
        entry.commits = commits
            .iter()
            .filter(|(id, _)| ranker.files_of_commit(id).any(|f| *f == entry.item_id))
            .map(|(id, _)| id.clone())
            .collect();
    }
}
