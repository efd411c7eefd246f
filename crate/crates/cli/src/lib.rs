//! Command-line pipeline (`validate`, `score`, `synth`, `pairs`, `eval`)
//! and the stateless HTTP scoring service.
//!
//! Exit codes: 0 on success, 1 for usage errors (bad flags, unreadable
//! paths, invalid configuration), 2 for data errors (malformed records,
//! unknown sample ids).

pub mod args;
pub mod commands;
pub mod config;
pub mod server;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;
use serde::{Deserialize, Serialize};
use storyground::reward::Scorer;
use storyground::{ImageMeta, RewardBreakdown, RewardConfig};

pub use args::{Cli, Command};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Body of `POST /v1/score`. `config`, when present, replaces the server's
/// reward configuration for this request only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRequest {
    pub images: Vec<ImageMeta>,
    pub cot_text: String,
    pub story_text: String,
    pub is_real: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RewardConfig>,
}

/// Scores one request. Both the `score` command and the service go through
/// [`Scorer::score`]; this only resolves the per-request configuration.
pub fn score_request(scorer: &Scorer, req: &ScoreRequest) -> Result<RewardBreakdown, String> {
    match req.config {
        Some(cfg) => {
            cfg.validate().map_err(|e| e.to_string())?;
            let custom = Scorer::with_lexicon(cfg, scorer.lexicon.clone());
            Ok(custom.score(&req.images, req.is_real, &req.cot_text, &req.story_text))
        }
        None => Ok(scorer.score(&req.images, req.is_real, &req.cot_text, &req.story_text)),
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    commands::dispatch(cli.command)
}

/// Parses `std::env::args`, runs the command and maps the outcome to the
/// process exit code.
pub fn main_with_args<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
