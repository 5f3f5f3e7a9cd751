//! Bug localization over prefixed code segments and commit messages.
//!
//! A repository is split into fixed-length code segments (each carrying a
//! package/type prefix) and its history into commit messages with changed
//! files. Both are embedded into persistent stores. A bug report is then
//! ranked against segments, commits, or both, and the matching files are
//! ordered by how often they occur among the best hits.
//!
//! The [`metrics`] module scores file rankings (Acc@N, MRR, MAP) and
//! [`negatives`] mines hard negative training pairs for fine-tuning.

pub mod config;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod negatives;
pub mod pipeline;
pub mod prefix;
pub mod rank;
pub mod store;
pub mod tokenize;

pub use config::{Config, ProviderConfig};
pub use corpus::{index_repository, segment_file, CodeSegment, IndexerConfig, SourceFile};
pub use embed::{embed, EmbeddingProvider, HashingProvider, ProviderKind, RemoteProvider};
pub use error::{Error, Result};
pub use ingest::{build_ground_truth, load_bug_reports, load_commits, BugReport, CommitRecord};
pub use metrics::{evaluate, EvalReport};
pub use negatives::{generate_training_pairs, FileCorpus, TrainingPair};
pub use pipeline::{Engine, RankOutput};
pub use rank::{Granularity, RankedResult, Ranker, Strategy};
pub use store::{build_store, cosine_scores, refresh, EmbeddingStore};
