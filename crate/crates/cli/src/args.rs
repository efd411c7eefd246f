use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use storyground::synthetic::Extension;

#[derive(Debug, Parser)]
#[command(
    name = "storyground",
    version,
    about = "Grounded story rewards, preference pairs and metrics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check every sample's own chain-of-thought and story against the structural rules.
    Validate {
        #[arg(long)]
        input: PathBuf,
        /// Per-sample report JSONL. Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score generated outputs against their samples.
    Score {
        /// Corpus JSONL files holding the samples (real and synthetic).
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// Generated outputs JSONL: sample_id, optional candidate, cot_text, story_text.
        #[arg(long)]
        outputs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        reward: RewardFlags,
    },
    /// Assemble synthetic image sequences from a real corpus.
    Synth {
        #[arg(long)]
        input: PathBuf,
        /// Synthetic corpus JSONL; provenance goes to `<out>.provenance.json`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Ratio::Double)]
        ratio: Ratio,
    },
    /// Build DPO preference pairs from scored candidates.
    Pairs {
        /// Scored candidates JSONL as written by `score`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        min_margin: Option<f64>,
    },
    /// Grounding and language metrics of generated outputs against references.
    Eval {
        /// Reference corpus JSONL.
        #[arg(long)]
        input: PathBuf,
        /// Generated outputs JSONL.
        #[arg(long)]
        outputs: PathBuf,
        /// Directory for metrics.json, persistence.csv and pronouns.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        iou: Option<f64>,
    },
    /// Serve POST /v1/score and GET /healthz.
    Serve {
        #[arg(long, default_value_t = 8080, value_parser = clap::value_parser!(u16).range(1..))]
        port: u16,
        #[command(flatten)]
        reward: RewardFlags,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Ratio {
    Double,
    Half,
}

impl From<Ratio> for Extension {
    fn from(r: Ratio) -> Self {
        match r {
            Ratio::Double => Extension::Double,
            Ratio::Half => Extension::Half,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Args)]
pub struct RewardFlags {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta_reid: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
}
