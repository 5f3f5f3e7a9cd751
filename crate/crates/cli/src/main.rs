//! `bugloc` command-line tool.

mod commands;
mod service;

use std::path::PathBuf;
use std::process::ExitCode;

use bugloc::rank::{Granularity, Strategy};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "bugloc", version, about = "Rank source files for bug reports")]
struct Cli {
    /// Configuration file (TOML, or JSON with a .json extension).
    #[arg(long, global = true, default_value = "bugloc.toml")]
    config: PathBuf,

    /// Log at debug level.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Index the repository and refresh the embedding stores.
    Index,
    /// Rank files for one bug report.
    Rank(RankArgs),
    /// Evaluate rankings against an issue export.
    Eval(EvalArgs),
    /// Write positive and mined negative training pairs as JSONL.
    GenNegatives(GenNegativesArgs),
    /// Serve ranking queries over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RankOptions {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long, default_value = "file")]
    pub granularity: Granularity,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Report file: plain text, or a JSON object with `title` and `body`.
    #[arg(required_unless_present = "text", conflicts_with = "text")]
    pub report_path: Option<PathBuf>,
    /// Query text given inline.
    #[arg(long)]
    pub text: Option<String>,
    #[command(flatten)]
    pub opts: RankOptions,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Issue export; defaults to `issue_export_path` from the config.
    pub export: Option<PathBuf>,
    /// Cutoffs for Acc@N.
    #[arg(long = "k", value_delimiter = ',', default_value = "1,3,5,10")]
    pub k_list: Vec<usize>,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long, default_value = "file")]
    pub granularity: Granularity,
    /// Where to write the JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenNegativesArgs {
    /// JSONL of `{bug_id, report_text, file_path}`; omit with --from-ground-truth.
    #[arg(required_unless_present = "from_ground_truth")]
    pub positives_path: Option<PathBuf>,
    /// Output JSONL path.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Build positives from the issue export's ground truth instead.
    #[arg(long, conflicts_with = "positives_path")]
    pub from_ground_truth: bool,
    #[arg(long)]
    pub top_n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(
        env_logger::Env::default().default_filter_or(if cli.verbose { "debug" } else { "warn" }),
    )
    .init();

    let result = commands::load_config(&cli.config).and_then(|cfg| match cli.command {
        Command::Index => commands::index(&cfg),
        Command::Rank(args) => commands::rank(&cfg, args),
        Command::Eval(args) => commands::eval(&cfg, args),
        Command::GenNegatives(args) => commands::gen_negatives(&cfg, args),
        Command::Serve(args) => service::run(cfg, args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
