use serde::Serialize;

/// Strict parse failure for model output. Chain-of-thought errors carry a
/// 1-based line number, story errors a byte offset into the story text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParseError {
    #[error("chain-of-thought line {line}: {reason}")]
    Cot { line: usize, reason: String },
    #[error("story offset {offset}: {reason}")]
    Story { offset: usize, reason: String },
}

impl ParseError {
    pub(crate) fn cot(line: usize, reason: impl Into<String>) -> Self {
        ParseError::Cot {
            line,
            reason: reason.into(),
        }
    }

    pub(crate) fn story(offset: usize, reason: impl Into<String>) -> Self {
        ParseError::Story {
            offset,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    InvalidInput(String),
    #[error("corpus lookup failed: story {story_idx}, image {img_idx}")]
    CorpusLookup { story_idx: usize, img_idx: usize },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
