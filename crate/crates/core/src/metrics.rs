//! Accuracy@k, reciprocal rank and average precision over file rankings.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::BugReport;

pub const DEFAULT_K_LIST: [usize; 4] = [1, 3, 5, 10];

/// 1 if any of the first `k` ranked files is relevant.
pub fn accuracy_at_k<S: AsRef<str>>(ranked: &[S], relevant: &BTreeSet<String>, k: usize) -> u8 {
    ranked.iter().take(k).any(|f| relevant.contains(f.as_ref())) as u8
}

/// 1-based rank of the first relevant file.
pub fn first_relevant_rank<S: AsRef<str>>(
    ranked: &[S],
    relevant: &BTreeSet<String>,
) -> Option<usize> {
    ranked
        .iter()
        .position(|f| relevant.contains(f.as_ref()))
        .map(|i| i + 1)
}

/// `1 / rank` of the first relevant file, 0 when none is ranked.
pub fn reciprocal_rank<S: AsRef<str>>(ranked: &[S], relevant: &BTreeSet<String>) -> f64 {
    first_relevant_rank(ranked, relevant).map_or(0.0, |r| 1.0 / r as f64)
}

/// Mean of precision at each relevant hit, divided by `|relevant|`.
///
/// Relevant files that never appear contribute 0. Repeated entries in
/// `ranked` only count at their first position.
pub fn average_precision<S: AsRef<str>>(ranked: &[S], relevant: &BTreeSet<String>) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut seen = HashSet::new();
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, f) in ranked.iter().enumerate() {
        let f = f.as_ref();
        if relevant.contains(f) && seen.insert(f) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / relevant.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEval {
    pub first_relevant_rank: Option<usize>,
    pub reciprocal_rank: f64,
    pub average_precision: f64,
    pub hits_at: BTreeMap<usize, u8>,
}

impl QueryEval {
    pub fn compute<S: AsRef<str>>(
        ranked: &[S],
        relevant: &BTreeSet<String>,
        k_list: &[usize],
    ) -> Self {
        QueryEval {
            first_relevant_rank: first_relevant_rank(ranked, relevant),
            reciprocal_rank: reciprocal_rank(ranked, relevant),
            average_precision: average_precision(ranked, relevant),
            hits_at: k_list
                .iter()
                .map(|&k| (k, accuracy_at_k(ranked, relevant, k)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    /// Keyed by k.
    pub acc: BTreeMap<usize, f64>,
    pub mrr: f64,
    pub map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_query: BTreeMap<String, QueryEval>,
    pub aggregates: Aggregates,
    pub queries: usize,
    pub skipped: usize,
}

impl EvalReport {
    /// Aggregate per-query results; the mean is independent of query order.
    pub fn from_queries(
        per_query: BTreeMap<String, QueryEval>,
        k_list: &[usize],
        skipped: usize,
    ) -> Result<Self> {
        let n = per_query.len();
        if n == 0 {
            return Err(Error::NoUsableQueries { skipped });
        }
        let mean =
            |f: &dyn Fn(&QueryEval) -> f64| per_query.values().map(f).sum::<f64>() / n as f64;
        let acc = k_list
            .iter()
            .map(|&k| (k, mean(&|q| q.hits_at.get(&k).copied().unwrap_or(0) as f64)))
            .collect();
        let aggregates = Aggregates {
            acc,
            mrr: mean(&|q| q.reciprocal_rank),
            map: mean(&|q| q.average_precision),
        };
        Ok(EvalReport {
            per_query,
            aggregates,
            queries: n,
            skipped,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One header row and one row per model, `Acc@k` columns then MAP and MRR.
    pub fn table(rows: &[(&str, &EvalReport)]) -> String {
        let ks: BTreeSet<usize> = rows
            .iter()
            .flat_map(|(_, r)| r.aggregates.acc.keys().copied())
            .collect();
        let width = rows.iter().map(|(m, _)| m.len()).max().unwrap_or(0).max(5);
        let mut out = String::new();
        let _ = write!(out, "{:<width$}", "Model");
        for k in &ks {
            let _ = write!(out, "  {:>7}", format!("Acc@{k}"));
        }
        let _ = writeln!(out, "  {:>7}  {:>7}", "MAP", "MRR");
        for (model, r) in rows {
            let _ = write!(out, "{model:<width$}");
            for k in &ks {
                match r.aggregates.acc.get(k) {
                    Some(v) => {
                        let _ = write!(out, "  {v:>7.3}");
                    }
                    None => {
                        let _ = write!(out, "  {:>7}", "-");
                    }
                }
            }
            let _ = writeln!(
                out,
                "  {:>7.3}  {:>7.3}",
                r.aggregates.map, r.aggregates.mrr
            );
        }
        out
    }
}

/// Rank every query with `rank_fn` and score the file lists.
///
/// Queries without ground truth are skipped and counted, not scored.
pub fn evaluate<F>(queries: &[BugReport], mut rank_fn: F, k_list: &[usize]) -> Result<EvalReport>
where
    F: FnMut(&BugReport) -> Result<Vec<String>>,
{
    if k_list.is_empty() || k_list.contains(&0) {
        return Err(Error::InvalidArgument(
            "k list must be non-empty and positive".into(),
        ));
    }
    let mut per_query = BTreeMap::new();
    let mut skipped = 0;
    for q in queries {
        if q.ground_truth_files.is_empty() {
            log::warn!("bug {} has no ground truth, skipped", q.bug_id);
            skipped += 1;
            continue;
        }
        let ranked = rank_fn(q)?;
        per_query.insert(
            q.bug_id.clone(),
            QueryEval::compute(&ranked, &q.ground_truth_files, k_list),
        );
    }
    EvalReport::from_queries(per_query, k_list, skipped)
}
