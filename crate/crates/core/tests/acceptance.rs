//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.
//!
//! Run with `cargo test -p bugloc-core --test acceptance`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use bugloc::corpus::{segment_file, IndexerConfig, SourceFile};
use bugloc::metrics::{accuracy_at_k, average_precision, evaluate, reciprocal_rank};
use bugloc::negatives::{generate_training_pairs, FileCorpus, PairSource};
use bugloc::pipeline::{run_eval, run_index, Engine};
use bugloc::rank::{CommitFiles, Granularity, RankedResult, Ranker, Strategy};
use bugloc::store::build_store;
use bugloc::{BugReport, CommitRecord, Config, HashingProvider};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 5] = [
        ("metric oracle equivalence", metric_oracle_equivalence),
        (
            "ranking brute-force equivalence",
            ranking_brute_force_equivalence,
        ),
        ("planted-signal retrieval", planted_signal_retrieval),
        ("index idempotence", index_idempotence),
        ("negative-sampler contract", negative_sampler_contract),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> std::result::Result<(), String> {
    ensure(elapsed < limit, || {
        format!("took {elapsed:?}, limit {limit:?}")
    })
}

// ---------------------------------------------------------------- metrics

fn oracle_acc(ranked: &[String], relevant: &BTreeSet<String>, k: usize) -> u8 {
    let mut hit = 0;
    for (pos, item) in ranked.iter().enumerate() {
        if pos < k && relevant.contains(item) {
            hit = 1;
        }
    }
    hit
}

fn position_of(ranked: &[String], item: &str) -> Option<usize> {
    ranked.iter().position(|r| r == item)
}

/// Walks the relevant set, not the ranking.
fn oracle_rr(ranked: &[String], relevant: &BTreeSet<String>) -> f64 {
    relevant
        .iter()
        .filter_map(|r| position_of(ranked, r))
        .min()
        .map_or(0.0, |p| 1.0 / (p + 1) as f64)
}

fn oracle_ap(ranked: &[String], relevant: &BTreeSet<String>) -> f64 {
    let mut sum = 0.0;
    for r in relevant {
        if let Some(p) = position_of(ranked, r) {
            let rel_above = relevant
                .iter()
                .filter(|o| position_of(ranked, o).is_some_and(|q| q <= p))
                .count();
            sum += rel_above as f64 / (p + 1) as f64;
        }
    }
    sum / relevant.len() as f64
}

fn metric_oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let k_list = [1usize, 3, 5, 10];
    let mut reports = Vec::new();
    let mut rankings: HashMap<String, Vec<String>> = HashMap::new();
    let mut oracle_means = (BTreeMap::<usize, f64>::new(), 0.0, 0.0);

    for case in 0..200 {
        let universe: Vec<String> = (0..rng.random_range(1..30))
            .map(|i| format!("f{i}.rs"))
            .collect();
        let mut ranked = universe.clone();
        ranked.shuffle(&mut rng);
        ranked.truncate(rng.random_range(0..=universe.len()));
        let n_rel = rng.random_range(1..=universe.len().min(6));
        let mut relevant: BTreeSet<String> =
            universe.choose_multiple(&mut rng, n_rel).cloned().collect();
        if rng.random_bool(0.2) {
            relevant.insert("not_in_universe.rs".into());
        }

        let mut ks = k_list.to_vec();
        ks.push(rng.random_range(1..40));
        for k in ks {
            let (got, want) = (
                accuracy_at_k(&ranked, &relevant, k),
                oracle_acc(&ranked, &relevant, k),
            );
            ensure(got == want, || {
                format!("case {case}: acc@{k} {got} != oracle {want}")
            })?;
        }
        let (rr, orr) = (
            reciprocal_rank(&ranked, &relevant),
            oracle_rr(&ranked, &relevant),
        );
        ensure((rr - orr).abs() <= 1e-9, || {
            format!("case {case}: RR {rr} != oracle {orr}")
        })?;
        let (ap, oap) = (
            average_precision(&ranked, &relevant),
            oracle_ap(&ranked, &relevant),
        );
        ensure((ap - oap).abs() <= 1e-9, || {
            format!("case {case}: AP {ap} != oracle {oap}")
        })?;

        for &k in &k_list {
            *oracle_means.0.entry(k).or_default() += oracle_acc(&ranked, &relevant, k) as f64;
        }
        oracle_means.1 += orr;
        oracle_means.2 += oap;
        let id = format!("bug{case}");
        reports.push(BugReport::from_text(id.clone(), "text").with_ground_truth(relevant));
        rankings.insert(id, ranked);
    }

    let report = evaluate(&reports, |r| Ok(rankings[&r.bug_id].clone()), &k_list)
        .map_err(|e| e.to_string())?;
    let n = 200.0;
    for (k, sum) in &oracle_means.0 {
        let got = report.aggregates.acc[k];
        ensure((got - sum / n).abs() <= 1e-9, || {
            format!("mean acc@{k} {got} != oracle {}", sum / n)
        })?;
    }
    ensure(
        (report.aggregates.mrr - oracle_means.1 / n).abs() <= 1e-9,
        || "MRR aggregate differs from oracle".into(),
    )?;
    ensure(
        (report.aggregates.map - oracle_means.2 / n).abs() <= 1e-9,
        || "MAP aggregate differs from oracle".into(),
    )?;
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("200 instances in {:?}", start.elapsed()))
}

// ---------------------------------------------------------------- ranking

fn pseudo_word(rng: &mut impl Rng, syllables: usize) -> String {
    const ONSETS: &[&str] = &[
        "b", "k", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v", "z",
    ];
    const NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
    (0..syllables)
        .map(|_| {
            format!(
                "{}{}",
                ONSETS.choose(rng).unwrap(),
                NUCLEI.choose(rng).unwrap()
            )
        })
        .collect()
}

fn sentence(rng: &mut impl Rng, vocab: &[String], len: std::ops::Range<usize>) -> String {
    let n = rng.random_range(len);
    (0..n)
        .map(|_| vocab.choose(rng).unwrap().as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

fn ref_cosine(q: &[f32], v: &[f32]) -> f64 {
    let norm = |x: &[f32]| x.iter().map(|a| *a as f64 * *a as f64).sum::<f64>().sqrt();
    let (qn, vn) = (norm(q), norm(v));
    if qn == 0.0 || vn == 0.0 {
        return 0.0;
    }
    let dot: f64 = q.iter().zip(v).map(|(a, b)| *a as f64 * *b as f64).sum();
    (dot / (qn * vn)).clamp(-1.0, 1.0)
}

/// Every item scored, sorted by score descending then id, first k kept.
fn ref_top_k(q: &[f32], items: &[(String, Vec<f32>)], k: usize) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = items
        .iter()
        .map(|(id, v)| (id.clone(), ref_cosine(q, v)))
        .collect();
    all.sort_by(|a, b| match b.1.partial_cmp(&a.1).unwrap() {
        Ordering::Equal => a.0.cmp(&b.0),
        o => o,
    });
    all.truncate(k);
    all
}

#[derive(Debug, Clone, PartialEq)]
struct RefFile {
    path: String,
    count: usize,
    best: f64,
}

/// Occurrence ranking: count desc, best score desc, path asc.
fn ref_most_common(occurrences: &[(String, f64)], k: usize) -> Vec<RefFile> {
    let mut paths: Vec<&String> = occurrences.iter().map(|(p, _)| p).collect();
    paths.sort();
    paths.dedup();
    let mut out: Vec<RefFile> = paths
        .into_iter()
        .map(|p| {
            let hits: Vec<f64> = occurrences
                .iter()
                .filter(|(o, _)| o == p)
                .map(|(_, s)| *s)
                .collect();
            RefFile {
                path: p.clone(),
                count: hits.len(),
                best: hits.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then(b.best.partial_cmp(&a.best).unwrap())
            .then(a.path.cmp(&b.path))
    });
    out.truncate(k);
    out
}

fn seg_path(id: &str) -> String {
    id[..id.rfind('#').unwrap()].to_string()
}

struct Fixture {
    segments: Vec<(String, Vec<f32>)>,
    commits: Vec<(String, Vec<f32>)>,
    touched: BTreeMap<String, Vec<String>>,
}

impl Fixture {
    fn seg_occurrences(&self, top: &[(String, f64)]) -> Vec<(String, f64)> {
        top.iter().map(|(id, s)| (seg_path(id), *s)).collect()
    }

    fn commit_occurrences(&self, top: &[(String, f64)]) -> Vec<(String, f64)> {
        top.iter()
            .flat_map(|(id, s)| self.touched[id].iter().map(move |f| (f.clone(), *s)))
            .collect()
    }

    fn score_merge(
        &self,
        segs: &[(String, f64)],
        commits: &[(String, f64)],
        k: usize,
    ) -> Vec<RefFile> {
        let mut merged: Vec<(f64, u8, String)> = segs
            .iter()
            .map(|(id, s)| (*s, 0, id.clone()))
            .chain(commits.iter().map(|(id, s)| (*s, 1, id.clone())))
            .collect();
        merged.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap()
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        merged.truncate(k);
        let mut occ = Vec::new();
        for (s, kind, id) in merged {
            if kind == 0 {
                occ.push((seg_path(&id), s));
            } else {
                occ.extend(self.touched[&id].iter().map(|f| (f.clone(), s)));
            }
        }
        ref_most_common(&occ, k)
    }

    fn file_union(
        &self,
        seg_files: &[RefFile],
        commit_files: &[RefFile],
        k: usize,
    ) -> Vec<RefFile> {
        let occ: Vec<(String, f64)> = seg_files
            .iter()
            .chain(commit_files)
            .map(|f| (f.path.clone(), f.best))
            .collect();
        ref_most_common(&occ, k)
    }
}

fn compare_items(
    what: &str,
    got: &RankedResult,
    want: &[(String, f64)],
) -> std::result::Result<(), String> {
    let ids: Vec<&str> = got.ids();
    let want_ids: Vec<&str> = want.iter().map(|(i, _)| i.as_str()).collect();
    ensure(ids == want_ids, || {
        format!("{what}: {ids:?} != {want_ids:?}")
    })?;
    for (e, (_, s)) in got.entries.iter().zip(want) {
        ensure((e.score - s).abs() <= 1e-12, || {
            format!("{what}: score {} != {s} for {}", e.score, e.item_id)
        })?;
    }
    Ok(())
}

fn compare_files(
    what: &str,
    got: &RankedResult,
    want: &[RefFile],
    fx: &Fixture,
    segs: &[(String, f64)],
    commits: &[(String, f64)],
) -> std::result::Result<(), String> {
    let got_rows: Vec<(&str, usize)> = got
        .entries
        .iter()
        .map(|e| (e.item_id.as_str(), e.count))
        .collect();
    let want_rows: Vec<(&str, usize)> = want.iter().map(|f| (f.path.as_str(), f.count)).collect();
    ensure(got_rows == want_rows, || {
        format!("{what}: {got_rows:?} != {want_rows:?}")
    })?;
    for (e, f) in got.entries.iter().zip(want) {
        ensure((e.score - f.best).abs() <= 1e-12, || {
            format!("{what}: best score of {} {} != {}", f.path, e.score, f.best)
        })?;
        let want_segs: Vec<&String> = segs
            .iter()
            .filter(|(id, _)| seg_path(id) == f.path)
            .map(|(id, _)| id)
            .collect();
        let want_commits: Vec<&String> = commits
            .iter()
            .filter(|(id, _)| fx.touched[id].contains(&f.path))
            .map(|(id, _)| id)
            .collect();
        ensure(e.segments.iter().collect::<Vec<_>>() == want_segs, || {
            format!("{what}: segment evidence of {} is {:?}", f.path, e.segments)
        })?;
        ensure(e.commits.iter().collect::<Vec<_>>() == want_commits, || {
            format!("{what}: commit evidence of {} is {:?}", f.path, e.commits)
        })?;
    }
    Ok(())
}

fn ranking_brute_force_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let provider = HashingProvider::default();
    let vocab: Vec<String> = (0..70).map(|_| pseudo_word(&mut rng, 2)).collect();

    let files: Vec<String> = (0..30)
        .map(|i| format!("pkg{}/file{i:02}.go", i % 4))
        .collect();
    let mut seg_texts: Vec<(String, String)> = Vec::new();
    for f in &files {
        for j in 0..4 {
            seg_texts.push((format!("{f}#{j}"), sentence(&mut rng, &vocab, 6..16)));
        }
    }
    // exact duplicates force score ties between files
    for i in (0..seg_texts.len()).step_by(17) {
        let dup = seg_texts[(i + 5) % seg_texts.len()].1.clone();
        seg_texts[i].1 = dup;
    }
    let mut commit_texts = Vec::new();
    let mut touched = BTreeMap::new();
    for i in 0..40 {
        let id = format!("{:040x}", 0xc0ffee_u64 * (i + 1));
        commit_texts.push((id.clone(), sentence(&mut rng, &vocab, 4..12)));
        let n_files = rng.random_range(1..=3);
        let mut fs: Vec<String> = files.choose_multiple(&mut rng, n_files).cloned().collect();
        fs.sort();
        touched.insert(id, fs);
    }
    ensure(seg_texts.len() == 120 && commit_texts.len() == 40, || {
        "fixture size".into()
    })?;

    let seg_store = build_store(&seg_texts, &provider, 16).map_err(|f| f.source.to_string())?;
    let commit_store =
        build_store(&commit_texts, &provider, 16).map_err(|f| f.source.to_string())?;
    let commit_files: CommitFiles = touched
        .iter()
        .map(|(id, fs)| (id.clone(), fs.iter().cloned().collect::<BTreeSet<_>>()))
        .collect();
    let ranker = Ranker::new(&seg_store, &commit_store, &commit_files);
    let fx = Fixture {
        segments: seg_texts
            .iter()
            .map(|(id, t)| (id.clone(), provider.embed_one(t)))
            .collect(),
        commits: commit_texts
            .iter()
            .map(|(id, t)| (id.clone(), provider.embed_one(t)))
            .collect(),
        touched,
    };

    let mut queries: Vec<String> = (0..20).map(|_| sentence(&mut rng, &vocab, 3..9)).collect();
    for i in 0..5 {
        queries.push(seg_texts[i * 23].1.clone());
    }

    let mut checks = 0;
    for (qi, text) in queries.iter().enumerate() {
        let q = provider.embed_one(text);
        for k in [1usize, 3, 5, 10] {
            let ctx = |what: &str| format!("query {qi} k={k} {what}");
            let segs = ref_top_k(&q, &fx.segments, k);
            let commits = ref_top_k(&q, &fx.commits, k);
            let seg_files = ref_most_common(&fx.seg_occurrences(&segs), k);
            let commit_files = ref_most_common(&fx.commit_occurrences(&commits), k);

            let bug = format!("q{qi}");
            let (got_segs, got_seg_files) = ranker
                .rank_code_segments(&bug, &q, k)
                .map_err(|e| e.to_string())?;
            compare_items(&ctx("segments"), &got_segs, &segs)?;
            compare_files(
                &ctx("segment files"),
                &got_seg_files,
                &seg_files,
                &fx,
                &segs,
                &[],
            )?;

            let (got_commits, got_commit_files) = ranker
                .rank_commits(&bug, &q, k)
                .map_err(|e| e.to_string())?;
            compare_items(&ctx("commits"), &got_commits, &commits)?;
            compare_files(
                &ctx("commit files"),
                &got_commit_files,
                &commit_files,
                &fx,
                &[],
                &commits,
            )?;

            for (strategy, want) in [
                (Strategy::ScoreMerge, fx.score_merge(&segs, &commits, k)),
                (
                    Strategy::FileUnion,
                    fx.file_union(&seg_files, &commit_files, k),
                ),
            ] {
                let got = ranker
                    .rank_combined(&bug, &q, k, strategy)
                    .map_err(|e| e.to_string())?;
                compare_files(
                    &ctx(strategy.as_str()),
                    &got.files,
                    &want,
                    &fx,
                    &segs,
                    &commits,
                )?;
            }
            checks += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "{checks} query/k combinations, 4 rankings each, in {:?}",
        start.elapsed()
    ))
}

// ---------------------------------------------------------------- planted signal

fn planted_signal_retrieval() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let provider = HashingProvider::default();
    let filler: Vec<String> = (0..80).map(|_| pseudo_word(&mut rng, 2)).collect();
    let mut used = HashSet::new();
    let mut idents = Vec::new();
    while idents.len() < 100 {
        let cap = |w: String| w[..1].to_uppercase() + &w[1..];
        let id = format!(
            "{}{}",
            pseudo_word(&mut rng, 3),
            cap(pseudo_word(&mut rng, 3))
        );
        if used.insert(id.clone()) && !filler.iter().any(|f| id.to_lowercase().contains(f)) {
            idents.push(id);
        }
    }

    let cfg = IndexerConfig::default();
    let mut seg_items = Vec::new();
    let mut paths = Vec::new();
    for (i, ident) in idents.iter().enumerate() {
        let path = format!("src/mod{}/unit{i:03}.go", i % 7);
        let mut body = String::from("package units\n\n");
        body.push_str(&format!("func {ident}(x int) int {{\n"));
        for _ in 0..6 {
            body.push_str(&format!("    {}\n", sentence(&mut rng, &filler, 4..9)));
        }
        body.push_str(&format!("    return {ident}Impl(x)\n}}\n"));
        let file = SourceFile::new(path.clone(), body);
        for s in segment_file(&file, &cfg) {
            seg_items.push((s.segment_id, s.text));
        }
        paths.push(path);
    }

    let mut records = Vec::new();
    let mut commit_items = Vec::new();
    for c in 0..60 {
        let id = format!("{:040x}", 0xabcdef_u64 * (c + 7));
        let f = rng.random_range(0..100);
        let other = rng.random_range(0..100);
        let message = if c % 2 == 0 {
            format!("fix {} handling", idents[f])
        } else {
            sentence(&mut rng, &filler, 3..8)
        };
        commit_items.push((id.clone(), message.clone()));
        records.push(CommitRecord {
            commit_id: id,
            message,
            changed_files: [paths[f].clone(), paths[other].clone()]
                .into_iter()
                .collect(),
            timestamp: 1_700_000_000 + c as i64,
        });
    }

    let segments = build_store(&seg_items, &provider, 32).map_err(|f| f.source.to_string())?;
    let commits = build_store(&commit_items, &provider, 32).map_err(|f| f.source.to_string())?;
    let engine = Engine::new(segments, commits, &records, Box::new(provider));

    let reports: Vec<BugReport> = idents
        .iter()
        .zip(&paths)
        .enumerate()
        .map(|(i, (ident, path))| {
            BugReport::new(
                format!("bug{i}"),
                format!("Crash when calling {ident}"),
                "Steps: open the app and trigger the call. Expected no panic.".to_string(),
            )
            .with_ground_truth([path.clone()])
        })
        .collect();

    let k_list = [1, 10];
    let seg = run_eval(
        &engine,
        &reports,
        10,
        &k_list,
        Strategy::ScoreMerge,
        Granularity::Segment,
    )
    .map_err(|e| e.to_string())?;
    let mut lines = vec![format!("segment acc@1 {:.2}", seg.aggregates.acc[&1])];
    ensure(seg.aggregates.acc[&1] >= 0.95, || lines.join(", "))?;
    for strategy in [Strategy::ScoreMerge, Strategy::FileUnion] {
        let comb = run_eval(&engine, &reports, 10, &k_list, strategy, Granularity::File)
            .map_err(|e| e.to_string())?;
        lines.push(format!(
            "{} acc@10 {:.2} vs segment {:.2}",
            strategy.as_str(),
            comb.aggregates.acc[&10],
            seg.aggregates.acc[&10]
        ));
        ensure(
            comb.aggregates.acc[&10] >= seg.aggregates.acc[&10] - 0.05,
            || lines.join(", "),
        )?;
    }
    Ok(lines.join(", "))
}

// ---------------------------------------------------------------- idempotence

fn git(dir: &Path, args: &[&str]) -> std::result::Result<(), String> {
    let out = Command::new("git")
        .args([
            "-c",
            "user.name=t",
            "-c",
            "user.email=t@t",
            "-c",
            "commit.gpgsign=false",
        ])
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| format!("git: {e}"))?;
    ensure(out.status.success(), || {
        format!("git {args:?}: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    walkdir(dir)
        .into_iter()
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (p.strip_prefix(dir).unwrap().to_path_buf(), bytes)
        })
        .collect()
}

fn walkdir(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walkdir(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn index_idempotence() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let repo = tmp.path().join("repo");
    std::fs::create_dir_all(repo.join("src")).unwrap();
    let words = |prefix: &str, n: usize| -> String {
        (0..n)
            .map(|i| format!("{prefix}{i}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    // 24 tokens at seg_len 16 is two segments
    std::fs::write(repo.join("src/two.txt"), words("alpha", 24)).unwrap();
    std::fs::write(repo.join("src/one.txt"), words("beta", 10)).unwrap();
    std::fs::write(repo.join("src/three.txt"), words("gamma", 40)).unwrap();
    git(&repo, &["init", "-q"])?;
    git(&repo, &["add", "."])?;
    git(
        &repo,
        &["commit", "-q", "-m", "initial import of the fixture"],
    )?;
    std::fs::write(repo.join("src/one.txt"), words("delta", 10)).unwrap();
    git(&repo, &["commit", "-q", "-am", "rewrite one"])?;

    let mut cfg = Config::new(&repo, tmp.path().join("store"));
    cfg.seg_len = 16;
    let provider = HashingProvider::default();

    let first = run_index(&cfg, &provider).map_err(|e| e.to_string())?;
    ensure(first.report.segments == 6 && first.commits == 2, || {
        format!(
            "fixture indexed as {} segments, {} commits",
            first.report.segments, first.commits
        )
    })?;
    ensure(first.re_embedded() == 8, || {
        format!("first run embedded {}", first.re_embedded())
    })?;
    let before = snapshot(&cfg.store_dir);

    let second = run_index(&cfg, &provider).map_err(|e| e.to_string())?;
    ensure(second.re_embedded() == 0, || {
        format!("unchanged rerun re-embedded {}", second.re_embedded())
    })?;
    let after = snapshot(&cfg.store_dir);
    ensure(before == after, || {
        "store bytes changed on an unchanged rerun".into()
    })?;

    let edited = words("alpha", 24)
        .replace("alpha0 ", "omega0 ")
        .replace("alpha23", "omega23");
    std::fs::write(repo.join("src/two.txt"), edited).unwrap();
    let third = run_index(&cfg, &provider).map_err(|e| e.to_string())?;
    let s = &third.segment_stats;
    ensure(
        s.re_embedded() == 2 && s.updated == 2 && s.added == 0 && s.removed == 0,
        || format!("edit of a two-segment file gave {s:?}"),
    )?;
    ensure(third.commit_stats.re_embedded() == 0, || {
        "commits re-embedded after a file edit".into()
    })?;
    Ok("rerun re-embedded 0 with identical bytes; two-segment edit re-embedded 2".into())
}

// ---------------------------------------------------------------- negatives

fn negative_sampler_contract() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let provider = HashingProvider::default();
    let vocab: Vec<String> = (0..40).map(|_| pseudo_word(&mut rng, 2)).collect();
    let cfg = IndexerConfig::default();
    let files: Vec<SourceFile> = (0..50)
        .map(|i| {
            SourceFile::new(
                format!("lib/part{i:02}.txt"),
                sentence(&mut rng, &vocab, 10..40),
            )
        })
        .collect();
    let corpus = FileCorpus::build(&files, &cfg, &provider).map_err(|e| e.to_string())?;

    // 14 single-file bugs and 3 bugs with two files: 20 positives
    let mut positives = Vec::new();
    let mut picks: Vec<&SourceFile> = files.iter().collect();
    picks.shuffle(&mut rng);
    let mut next = picks.into_iter();
    for b in 0..17 {
        let report = BugReport::from_text(format!("bug{b}"), sentence(&mut rng, &vocab, 5..10));
        let n = if b < 3 { 2 } else { 1 };
        for _ in 0..n {
            positives.push((report.clone(), next.next().unwrap().path.clone()));
        }
    }
    ensure(positives.len() == 20, || "fixture size".into())?;

    let pairs = generate_training_pairs(&positives, &corpus, 10).map_err(|e| e.to_string())?;

    // brute-force neighbours: whole-file bag of path words plus content
    let embedded: Vec<(String, Vec<f32>)> = files
        .iter()
        .map(|f| {
            (
                f.path.clone(),
                provider.embed_one(&format!("{} {}", f.path.replace('/', " "), f.content)),
            )
        })
        .collect();
    let mut truth: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (r, f) in &positives {
        truth.entry(&r.bug_id).or_default().insert(f);
    }
    let mut expected: Vec<(String, String, u8)> = Vec::new();
    let mut drops = 0;
    for (r, f) in &positives {
        expected.push((r.bug_id.clone(), f.clone(), 1));
        let q = &embedded.iter().find(|(p, _)| p == f).unwrap().1;
        let others: Vec<(String, Vec<f32>)> =
            embedded.iter().filter(|(p, _)| p != f).cloned().collect();
        let neighbours = ref_top_k(q, &others, 10);
        let via_lib = corpus.top_similar_files(f, 10).map_err(|e| e.to_string())?;
        let lib_ids: Vec<&String> = via_lib.iter().map(|(p, _)| p).collect();
        let ref_ids: Vec<&String> = neighbours.iter().map(|(p, _)| p).collect();
        ensure(lib_ids == ref_ids, || {
            format!("neighbours of {f}: {lib_ids:?} != {ref_ids:?}")
        })?;
        for (n, _) in neighbours {
            if truth[r.bug_id.as_str()].contains(n.as_str()) {
                drops += 1;
            } else if !expected.contains(&(r.bug_id.clone(), n.clone(), 0)) {
                expected.push((r.bug_id.clone(), n, 0));
            } else {
                drops += 1;
            }
        }
    }

    let got: Vec<(String, String, u8)> = pairs
        .iter()
        .map(|p| (p.bug_id.clone(), p.file_path.clone(), p.label))
        .collect();
    let n_pos = pairs.iter().filter(|p| p.label == 1).count();
    let n_neg = pairs.iter().filter(|p| p.label == 0).count();
    ensure(n_pos == 20 && n_neg == 200 - drops, || {
        format!(
            "{n_pos} positives, {n_neg} negatives, expected 20 and {}",
            200 - drops
        )
    })?;
    ensure(got == expected, || {
        "pair list differs from brute force".into()
    })?;
    for p in &pairs {
        let own = truth[p.bug_id.as_str()].contains(p.file_path.as_str());
        ensure((p.label == 1) == own, || {
            format!("{} labelled {} for {}", p.file_path, p.label, p.bug_id)
        })?;
        ensure(
            (p.label == 1) == (p.source == PairSource::GroundTruth),
            || format!("source mismatch on {}", p.file_path),
        )?;
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!(
        "20 positives + {n_neg} negatives ({drops} ground-truth drops) in {:?}",
        start.elapsed()
    ))
}
