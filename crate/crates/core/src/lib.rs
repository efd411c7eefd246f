//! Contrastive reward machinery for grounded visual storytelling.
//!
//! A model output is a chain-of-thought (per-frame analyses, entity tables
//! with bounding boxes, narrative phases) followed by a story whose text is
//! tied to those entities through inline `gdi`/`gdo`/`gda`/`gdl` tags. This
//! crate parses and validates that format, scores it with a
//! re-identification + grounding reward that is inverted on synthetic
//! (incoherent) image sequences, assembles those synthetic sequences,
//! builds DPO preference pairs, and computes grounding and language
//! metrics.

pub mod error;
pub mod fixtures;
pub mod io;
pub mod metrics;
pub mod preference;
pub mod reward;
pub mod story;
pub mod synthetic;
pub mod validate;

pub use error::{Error, ParseError, Result};
pub use reward::{compute_reward, RewardBreakdown, RewardConfig};
pub use story::{
    parse_cot, parse_story, render_story, CotDocument, GroundedStory, ImageMeta, StorySample,
};
pub use validate::{validate_cot, validate_story, RuleId, ValidationReport, Violation};
