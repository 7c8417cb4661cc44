//! `factlex`: command-line front end.
//!
//! Corpora are JSONL (`{"id", "text", "label"?, "split"?, "meta"?}` per line);
//! roles travel in a sidecar JSONL (`{"id", "roles": [..]}`). Exit status is
//! 0 on success, 2 for configuration errors and 3 for data errors.

mod commands;
mod exit;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use factlex_core::harness::report::ReportFormat;
use factlex_core::pipeline::InputSelection;
use factlex_core::Split;

#[derive(Debug, Parser)]
#[command(name = "factlex", version, about = "Fact-based legal judgment prediction toolkit")]
pub struct Cli {
    /// JSON config file; its schema depends on the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed of the subcommand's config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file or, for gen-synthetic, directory. Defaults to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

/// Where sentence roles come from; without either, sentences carry no role.
#[derive(Debug, Args)]
pub struct RoleSource {
    /// Role sidecar JSONL.
    #[arg(long, conflicts_with = "tagger")]
    pub roles: Option<PathBuf>,
    /// Tagger model JSON used to tag the corpus.
    #[arg(long)]
    pub tagger: Option<PathBuf>,
}

/// Overrides of the model's stored pipeline.
#[derive(Debug, Args)]
pub struct PipelineOverride {
    #[arg(long)]
    pub selection: Option<InputSelection>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub technique: Option<u8>,
}

fn parse_split(s: &str) -> Result<Split, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("unknown split {s:?}; expected train, dev or test"))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Converts text files (one document each) or corpus JSONL files into
    /// normalized corpus JSONL.
    Ingest {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Split assigned to text-file documents.
        #[arg(long, value_parser = parse_split, default_value = "train")]
        split: Split,
        /// Verdict label assigned to text-file documents.
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
        label: Option<u8>,
    },
    /// Replaces entity mentions by category placeholders.
    Mask {
        corpus: PathBuf,
        /// Entity sidecar JSONL (`{"id", "spans": [..]}`).
        #[arg(long)]
        entities: Option<PathBuf>,
        /// Skip the built-in date and case-citation detectors.
        #[arg(long)]
        no_builtin: bool,
    },
    /// Tags rhetorical roles with a tagger model, or trains one from gold roles.
    Tag {
        corpus: PathBuf,
        /// Tagger model to apply; output is a role sidecar.
        #[arg(long, required_unless_present = "train", conflicts_with = "train")]
        tagger: Option<PathBuf>,
        /// Gold role sidecar to train on; output is a tagger model.
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
    },
    /// Budgeted role-weighted extractive summaries. Config: summary spec.
    Summarize {
        corpus: PathBuf,
        #[command(flatten)]
        roles: RoleSource,
    },
    /// Chunk spans of each document's resolved input. Config: chunking config.
    Chunk {
        corpus: PathBuf,
        #[command(flatten)]
        roles: RoleSource,
        #[arg(long, default_value = "full")]
        selection: InputSelection,
    },
    /// Trains a predictor on the train split, selecting on dev.
    /// Config: `{"pipeline": .., "train": ..}`.
    Train {
        corpus: PathBuf,
        #[command(flatten)]
        roles: RoleSource,
        /// Writes the training report JSON here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Predicts every document of the corpus.
    Predict {
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        roles: RoleSource,
        #[command(flatten)]
        pipeline: PipelineOverride,
    },
    /// Top-k occlusion explanations for every document.
    Explain {
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        roles: RoleSource,
        #[command(flatten)]
        pipeline: PipelineOverride,
        #[arg(short, long, default_value_t = 5)]
        k: usize,
    },
    /// Macro precision, recall and F1 of a model on one split.
    Eval {
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        roles: RoleSource,
        #[command(flatten)]
        pipeline: PipelineOverride,
        #[arg(long, value_parser = parse_split, default_value = "test")]
        split: Split,
    },
    /// Trains and evaluates every input-selection × technique cell.
    /// Config: `{"grid": .., "train": ..}`.
    Grid {
        corpus: PathBuf,
        #[command(flatten)]
        roles: RoleSource,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
        /// Writes full experiment rows as JSON here.
        #[arg(long)]
        rows: Option<PathBuf>,
    },
    /// Writes a planted-signal corpus, its gold roles and a grid config into
    /// the `--out` directory.
    GenSynthetic {
        #[arg(long, default_value_t = 200)]
        docs: usize,
    },
    /// Serves the HTTP API. Config: service config.
    Serve {
        /// Overrides the config's bind address.
        #[arg(long)]
        bind: Option<SocketAddr>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            failure.exit_code()
        }
    }
}
