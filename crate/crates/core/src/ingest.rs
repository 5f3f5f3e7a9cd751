//! Commit history and issue-export ingestion.
//!
//! Commits are read through the system `git` binary. Issues come from an
//! offline JSON export; see [`Issue`] for the accepted schema.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub commit_id: String,
    pub message: String,
    pub changed_files: BTreeSet<String>,
    /// Committer time, UTC seconds.
    pub timestamp: i64,
}

const RECORD_SEP: u8 = 0x1e;
const FIELD_SEP: u8 = 0x1f;

/// `git log` arguments producing the layout understood by [`parse_git_log`].
fn git_log_args(limit: Option<usize>) -> Vec<String> {
    let mut args = vec![
        "log".to_string(),
        "--no-color".into(),
        "--format=%x1e%H%x1f%ct%x1f%B%x1f".into(),
        "--name-status".into(),
        "-M".into(),
        "--diff-merges=first-parent".into(),
        "-z".into(),
    ];
    if let Some(n) = limit {
        args.push(format!("-n{n}"));
    }
    args
}

fn git(repo: &Path, args: &[String]) -> Result<std::process::Output> {
    Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(args)
        .output()
        .map_err(|e| Error::Git(format!("cannot run git: {e}")))
}

fn is_git_repository(repo: &Path) -> Result<bool> {
    let out = git(repo, &["rev-parse".into(), "--git-dir".into()])?;
    Ok(out.status.success())
}

/// Newest-first commit history of `repo` with changed-file sets.
///
/// Renames are recorded under their new path. Merge commits carry the
/// changes they bring to their first parent.
pub fn load_commits(repo: &Path, limit: Option<usize>) -> Result<Vec<CommitRecord>> {
    if !repo.exists() || !is_git_repository(repo)? {
        return Err(Error::NotARepository(repo.to_path_buf()));
    }
    if limit == Some(0) {
        return Ok(Vec::new());
    }
    let head = git(
        repo,
        &[
            "rev-parse".into(),
            "--verify".into(),
            "-q".into(),
            "HEAD".into(),
        ],
    )?;
    if !head.status.success() {
        // no commits yet
        return Ok(Vec::new());
    }
    let out = git(repo, &git_log_args(limit))?;
    if !out.status.success() {
        return Err(Error::Git(
            String::from_utf8_lossy(&out.stderr).trim().to_string(),
        ));
    }
    let (commits, warnings) = parse_git_log(&out.stdout);
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(commits)
}

/// Parse `git log` output produced with [`git_log_args`].
///
/// Returns the parsed commits in input order plus one warning per record that
/// could not be understood.
pub fn parse_git_log(raw: &[u8]) -> (Vec<CommitRecord>, Vec<String>) {
    let mut commits = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in raw.split(|b| *b == RECORD_SEP).enumerate() {
        if i == 0 {
            if !record.iter().all(|b| b.is_ascii_whitespace() || *b == 0) {
                warnings.push("ignoring leading bytes before the first commit".to_string());
            }
            continue;
        }
        match parse_record(record) {
            Ok(c) => {
                if seen.insert(c.commit_id.clone()) {
                    commits.push(c);
                } else {
                    warnings.push(format!("duplicate commit {}", c.commit_id));
                }
            }
            Err(msg) => warnings.push(format!("skipping unparsable commit record #{i}: {msg}")),
        }
    }
    (commits, warnings)
}

fn parse_record(record: &[u8]) -> std::result::Result<CommitRecord, String> {
    let mut head = record.splitn(3, |b| *b == FIELD_SEP);
    let hash = head.next().ok_or("missing hash")?;
    let ts = head.next().ok_or("missing timestamp")?;
    let rest = head.next().ok_or("missing message")?;

    let commit_id = std::str::from_utf8(hash)
        .map_err(|_| "non-UTF-8 hash")?
        .to_string();
    if commit_id.is_empty() || !commit_id.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(format!("invalid commit id {commit_id:?}"));
    }
    let timestamp = std::str::from_utf8(ts)
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .ok_or("invalid timestamp")?;

    // The message ends at the last FIELD_SEP; name-status entries follow, NUL separated.
    let end = rest
        .iter()
        .rposition(|b| *b == FIELD_SEP)
        .ok_or("unterminated message")?;
    let message = String::from_utf8_lossy(&rest[..end]).trim_end().to_string();
    let status_bytes = &rest[end + 1..];

    let mut fields = status_bytes
        .split(|b| *b == 0)
        .map(|f| {
            let f = f.strip_prefix(b"\n").unwrap_or(f);
            String::from_utf8_lossy(f).into_owned()
        })
        .filter(|f| !f.is_empty());
    let mut changed_files = BTreeSet::new();
    while let Some(status) = fields.next() {
        let kind = status.chars().next().ok_or("empty status")?;
        if !kind.is_ascii_uppercase() {
            return Err(format!("unexpected status {status:?}"));
        }
        let first = fields.next().ok_or("status without path")?;
        let path = if matches!(kind, 'R' | 'C') {
            fields.next().ok_or("rename without destination")?
        } else {
            first
        };
        changed_files.insert(path);
    }

    Ok(CommitRecord {
        commit_id,
        message,
        changed_files,
        timestamp,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugReport {
    pub bug_id: String,
    pub title: String,
    pub body: String,
    /// Empty for live queries.
    pub ground_truth_files: BTreeSet<String>,
    /// Commit ids from `linked_commits` followed by `linked_pr_commits`.
    pub linked_commits: Vec<String>,
    pub query_text: String,
}

impl BugReport {
    pub fn new(
        bug_id: impl Into<String>,
        title: impl Into<String>,
        body: impl Into<String>,
    ) -> Self {
        let title = title.into();
        let body = body.into();
        BugReport {
            bug_id: bug_id.into(),
            query_text: format!("{title}\n{body}"),
            title,
            body,
            ground_truth_files: BTreeSet::new(),
            linked_commits: Vec::new(),
        }
    }

    /// A report whose query is `text` verbatim.
    pub fn from_text(bug_id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        BugReport {
            bug_id: bug_id.into(),
            title: text.clone(),
            body: String::new(),
            ground_truth_files: BTreeSet::new(),
            linked_commits: Vec::new(),
            query_text: text,
        }
    }

    pub fn with_ground_truth<I, S>(mut self, files: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.ground_truth_files = files.into_iter().map(Into::into).collect();
        self
    }
}

/// One element of the issue-export JSON array.
#[derive(Debug, Clone, Deserialize)]
pub struct Issue {
    #[serde(deserialize_with = "string_or_number")]
    pub id: String,
    pub title: String,
    #[serde(default, deserialize_with = "null_as_empty")]
    pub body: String,
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default)]
    pub state: Option<String>,
    #[serde(default)]
    pub linked_commits: Vec<String>,
    #[serde(default)]
    pub linked_pr_commits: Vec<String>,
}

fn string_or_number<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<String, D::Error> {
    match serde_json::Value::deserialize(d)? {
        serde_json::Value::String(s) => Ok(s),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        other => Err(serde::de::Error::custom(format!(
            "expected string id, got {other}"
        ))),
    }
}

fn null_as_empty<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    Ok(Option::<String>::deserialize(d)?.unwrap_or_default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueMode {
    /// Closed, bug-labelled issues with at least one linked commit.
    GroundTruth,
    /// Every bug-labelled issue, linked or not.
    Live,
}

pub fn default_bug_labels() -> Vec<String> {
    vec!["bug".to_string()]
}

/// Parse an issue export held in memory.
pub fn parse_issue_export(
    json: &str,
    bug_labels: &[String],
    mode: IssueMode,
) -> Result<(Vec<BugReport>, Vec<String>)> {
    let values: Vec<serde_json::Value> =
        serde_json::from_str(json).map_err(|e| Error::json("issue export", &e))?;
    let labels: HashSet<String> = bug_labels.iter().map(|l| l.to_lowercase()).collect();
    let mut warnings = Vec::new();
    let mut reports = Vec::new();
    let mut ids = HashSet::new();

    for (i, v) in values.into_iter().enumerate() {
        let issue: Issue = match serde_json::from_value(v) {
            Ok(issue) => issue,
            Err(e) => {
                warnings.push(format!("issue #{i}: skipped, {e}"));
                continue;
            }
        };
        if !issue
            .labels
            .iter()
            .any(|l| labels.contains(&l.to_lowercase()))
        {
            continue;
        }
        let linked: Vec<String> = issue
            .linked_commits
            .iter()
            .chain(&issue.linked_pr_commits)
            .map(|c| c.trim().to_ascii_lowercase())
            .filter(|c| !c.is_empty())
            .collect();
        if mode == IssueMode::GroundTruth {
            let closed = issue
                .state
                .as_deref()
                .is_none_or(|s| s.eq_ignore_ascii_case("closed"));
            if !closed || linked.is_empty() {
                continue;
            }
        }
        if issue.title.trim().is_empty() && issue.body.trim().is_empty() {
            warnings.push(format!("issue {}: skipped, empty title and body", issue.id));
            continue;
        }
        if !ids.insert(issue.id.clone()) {
            warnings.push(format!("issue {}: skipped, duplicate id", issue.id));
            continue;
        }
        let mut report = BugReport::new(issue.id, issue.title, issue.body);
        report.linked_commits = linked;
        reports.push(report);
    }
    Ok((reports, warnings))
}

/// Load bug reports from an issue-export file.
pub fn load_bug_reports(
    path: &Path,
    bug_labels: &[String],
    mode: IssueMode,
) -> Result<Vec<BugReport>> {
    let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (reports, warnings) = parse_issue_export(&json, bug_labels, mode)?;
    for w in warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(reports)
}

struct CommitIndex<'a> {
    by_id: HashMap<&'a str, &'a CommitRecord>,
    sorted: Vec<&'a str>,
}

impl<'a> CommitIndex<'a> {
    fn new(commits: &'a [CommitRecord]) -> Self {
        let by_id: HashMap<&str, &CommitRecord> =
            commits.iter().map(|c| (c.commit_id.as_str(), c)).collect();
        let mut sorted: Vec<&str> = by_id.keys().copied().collect();
        sorted.sort_unstable();
        CommitIndex { by_id, sorted }
    }

    /// Exact id, or an abbreviated id (≥ 4 hex digits) with a unique match.
    fn resolve(&self, id: &str) -> Option<&'a CommitRecord> {
        if let Some(c) = self.by_id.get(id) {
            return Some(c);
        }
        if id.len() < 4 {
            return None;
        }
        let start = self.sorted.partition_point(|c| *c < id);
        let mut hits = self.sorted[start..]
            .iter()
            .take_while(|c| c.starts_with(id));
        let first = hits.next()?;
        if hits.next().is_some() {
            return None;
        }
        self.by_id.get(first).copied()
    }
}

/// Fill in each report's ground truth as the union of its linked commits'
/// changed files, dropping reports that end up with none.
pub fn build_ground_truth(reports: Vec<BugReport>, commits: &[CommitRecord]) -> Vec<BugReport> {
    let index = CommitIndex::new(commits);
    let mut out = Vec::new();
    for mut report in reports {
        let mut files = BTreeSet::new();
        for id in &report.linked_commits {
            match index.resolve(id) {
                Some(c) => files.extend(c.changed_files.iter().cloned()),
                None => log::warn!(
                    "bug {}: linked commit {id} not found, ignored",
                    report.bug_id
                ),
            }
        }
        if files.is_empty() {
            log::warn!("bug {}: no ground-truth files, dropped", report.bug_id);
            continue;
        }
        report.ground_truth_files = files;
        out.push(report);
    }
    out
}
