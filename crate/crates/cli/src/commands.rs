use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use bugloc::metrics::EvalReport;
use bugloc::negatives::{parse_positives, to_jsonl};
use bugloc::pipeline::{
    load_ground_truth, positives_from_ground_truth, run_eval, run_gen_negatives, run_index,
    RankOutput, RankRequest, ADHOC_BUG_ID,
};
use bugloc::{Config, Engine};

use crate::{EvalArgs, GenNegativesArgs, RankArgs};

pub fn load_config(path: &Path) -> Result<Config> {
    let cfg = Config::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn open_engine(cfg: &Config) -> Result<Engine> {
    Ok(Engine::open(&cfg.store_dir, cfg.provider.build()?)?)
}

/// Rank a request with config defaults filled in. The CLI and the service
/// both answer through here.
pub fn answer(engine: &Engine, cfg: &Config, req: &RankRequest) -> bugloc::Result<RankOutput> {
    engine.rank(
        req.bug_id.as_deref().unwrap_or(ADHOC_BUG_ID),
        &req.text,
        req.k.unwrap_or(cfg.k),
        req.strategy.unwrap_or(cfg.strategy),
        req.granularity.unwrap_or_default(),
    )
}

pub fn index(cfg: &Config) -> Result<()> {
    let provider = cfg.provider.build()?;
    let summary = run_index(cfg, provider.as_ref())?;
    println!(
        "indexed {} files into {} segments, {} commits; {} re-embedded",
        summary.report.files,
        summary.report.segments,
        summary.commits,
        summary.re_embedded()
    );
    Ok(())
}

/// `(bug_id, text)` from a report file.
fn read_report(path: &Path) -> Result<(Option<String>, String)> {
    let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(serde_json::Value::Object(obj)) = serde_json::from_str::<serde_json::Value>(&raw) {
        let field = |k: &str| {
            obj.get(k)
                .and_then(|v| v.as_str())
                .unwrap_or("")
                .to_string()
        };
        let id = obj.get("id").map(|v| match v {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        });
        return Ok((id, format!("{}\n{}", field("title"), field("body"))));
    }
    Ok((None, raw))
}

pub fn rank(cfg: &Config, args: RankArgs) -> Result<()> {
    let (bug_id, text) = match (&args.report_path, args.text) {
        (_, Some(text)) => (None, text),
        (Some(path), None) => read_report(path)?,
        (None, None) => bail!("give a report path or --text"),
    };
    let req = RankRequest {
        text,
        bug_id,
        k: args.opts.k,
        strategy: args.opts.strategy,
        granularity: Some(args.opts.granularity),
    };
    if req.k == Some(0) {
        bail!("--k must be at least 1");
    }
    let engine = open_engine(cfg)?;
    print!("{}", answer(&engine, cfg, &req)?.to_json());
    Ok(())
}

pub fn eval(cfg: &Config, args: EvalArgs) -> Result<()> {
    let export = args
        .export
        .or_else(|| cfg.issue_export_path.clone())
        .context("no issue export given and no issue_export_path in the config")?;
    let reports = load_ground_truth(cfg, &export)?;
    let engine = open_engine(cfg)?;
    let strategy = args.strategy.unwrap_or(cfg.strategy);
    let report = run_eval(
        &engine,
        &reports,
        cfg.k,
        &args.k_list,
        strategy,
        args.granularity,
    )?;
    let out = args
        .out
        .unwrap_or_else(|| cfg.store_dir.join("eval_report.json"));
    fs::write(&out, report.to_json() + "\n")
        .with_context(|| format!("writing {}", out.display()))?;
    let model = match args.granularity {
        bugloc::Granularity::File => strategy.as_str().to_string(),
        g => format!("{g:?}").to_lowercase(),
    };
    print!("{}", EvalReport::table(&[(&model, &report)]));
    eprintln!(
        "{} queries scored, {} skipped; report written to {}",
        report.queries,
        report.skipped,
        out.display()
    );
    Ok(())
}

pub fn gen_negatives(cfg: &Config, args: GenNegativesArgs) -> Result<()> {
    let mut cfg = cfg.clone();
    if let Some(n) = args.top_n {
        cfg.top_n = n;
    }
    let positives = match &args.positives_path {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_positives(&text)?
        }
        None => {
            let export = cfg
                .issue_export_path
                .clone()
                .context("--from-ground-truth needs issue_export_path in the config")?;
            positives_from_ground_truth(&load_ground_truth(&cfg, &export)?)
        }
    };
    let provider = cfg.provider.build()?;
    let pairs = run_gen_negatives(&cfg, provider.as_ref(), &positives)?;
    fs::write(&args.out, to_jsonl(&pairs))
        .with_context(|| format!("writing {}", args.out.display()))?;
    let negatives = pairs.iter().filter(|p| p.label == 0).count();
    println!(
        "{} pairs ({} positive, {negatives} negative) written to {}",
        pairs.len(),
        pairs.len() - negatives,
        args.out.display()
    );
    Ok(())
}
