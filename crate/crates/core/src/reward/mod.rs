//! Contrastive reward.
//!
//! For a structurally valid output the reward is
//! `w_reid * r_reid + w_ground * r_ground`; anything that fails parsing or
//! validation scores exactly `invalid_penalty` (-1.0 by default).
//!
//! `r_reid` blends character and object persistence (`alpha * r_char +
//! beta_reid * r_obj`) and is inverted (`1 - x`) for synthetic sequences,
//! where cross-frame identity links are wrong by construction. `r_ground`
//! is the grounded fraction of pronouns and proper nouns per class.

mod lexicon;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::story::{CotDocument, EntityRecord, GroundedStory, ImageMeta, StorySample};
use crate::validate::{check_output, Violation};

pub use lexicon::{
    classify_token, reference_tokens, tokenize, Lexicon, Placement, ReferenceToken, ReferentClass,
    Token, TokenClass, TokenKind,
};

const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub w_reid: f64,
    pub w_ground: f64,
    pub alpha: f64,
    pub beta_reid: f64,
    pub gamma: f64,
    pub delta: f64,
    pub invalid_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            w_reid: 0.5,
            w_ground: 0.5,
            alpha: 0.6,
            beta_reid: 0.4,
            gamma: 0.5,
            delta: 0.5,
            invalid_penalty: -1.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("w_reid", self.w_reid),
            ("w_ground", self.w_ground),
            ("alpha", self.alpha),
            ("beta_reid", self.beta_reid),
            ("gamma", self.gamma),
            ("delta", self.delta),
        ];
        for (name, w) in weights {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Config(format!("{name} = {w} is outside [0, 1]")));
            }
        }
        for (a, b, x, y) in [
            ("alpha", "beta_reid", self.alpha, self.beta_reid),
            ("gamma", "delta", self.gamma, self.delta),
            ("w_reid", "w_ground", self.w_reid, self.w_ground),
        ] {
            if (x + y - 1.0).abs() > WEIGHT_TOLERANCE {
                return Err(Error::Config(format!("{a} + {b} = {} must equal 1", x + y)));
            }
        }
        if !self.invalid_penalty.is_finite() {
            return Err(Error::Config("invalid_penalty must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct GroundingCounts {
    /// Grounded character pronouns.
    pub G_char: u32,
    /// Grounded character proper nouns.
    pub P_char: u32,
    /// All character-attributed pronouns and proper nouns.
    pub T_char: u32,
    pub G_obj: u32,
    pub P_obj: u32,
    pub T_obj: u32,
}

/// Per-output score. Components are `None` on the penalty path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub valid: bool,
    pub r_char: Option<f64>,
    pub r_obj: Option<f64>,
    pub r_reid: Option<f64>,
    pub r_ground: Option<f64>,
    pub total: f64,
    pub violations: Vec<Violation>,
}

impl RewardBreakdown {
    pub fn invalid(cfg: &RewardConfig, violations: Vec<Violation>) -> Self {
        Self {
            valid: false,
            r_char: None,
            r_obj: None,
            r_reid: None,
            r_ground: None,
            total: cfg.invalid_penalty,
            violations,
        }
    }

    /// `alpha * r_char + beta_reid * r_obj`, i.e. `r_reid` before any
    /// synthetic inversion.
    pub fn raw_reid(&self, cfg: &RewardConfig) -> Option<f64> {
        Some(cfg.alpha * self.r_char? + cfg.beta_reid * self.r_obj?)
    }
}

fn persistence<'a>(entities: impl Iterator<Item = &'a EntityRecord>, frame_count: usize) -> f64 {
    if frame_count == 0 {
        return 0.0;
    }
    let (count, frames) = entities.fold((0usize, 0usize), |(n, sum), e| {
        let frames = e
            .appearances
            .keys()
            .filter(|&&f| f < frame_count)
            .collect::<BTreeSet<_>>();
        (n + 1, sum + frames.len())
    });
    if count == 0 {
        return 0.0;
    }
    (frames as f64 / (count * frame_count) as f64).min(1.0)
}

/// Mean fraction of frames each character appears in, capped at 1. Zero
/// when there are no characters.
pub fn compute_r_char(cot: &CotDocument, frame_count: usize) -> f64 {
    persistence(cot.characters(), frame_count)
}

/// Object analogue of [`compute_r_char`] over objects, landmarks and
/// backgrounds.
pub fn compute_r_obj(cot: &CotDocument, frame_count: usize) -> f64 {
    persistence(cot.objects(), frame_count)
}

pub fn compute_r_reid(r_char: f64, r_obj: f64, is_real: bool, cfg: &RewardConfig) -> f64 {
    let raw = cfg.alpha * r_char + cfg.beta_reid * r_obj;
    if is_real {
        raw
    } else {
        1.0 - raw
    }
}

/// Counts pronouns and proper nouns and how many of them are grounded.
///
/// Grounded tokens take their class from the tag's ids (any `char` id makes
/// it a character reference); ungrounded ones from the lexicon, with
/// proper nouns counted as characters. Tokens only inside `gdl` tags are
/// not counted.
pub fn count_groundings(story: &GroundedStory, lexicon: &Lexicon) -> GroundingCounts {
    let mut c = GroundingCounts::default();
    for r in reference_tokens(story, lexicon) {
        let pronoun = r.class.kind == TokenKind::Pronoun;
        let character = match r.placement {
            Placement::Location => continue,
            Placement::Grounded { character } => {
                match (character, pronoun) {
                    (true, true) => c.G_char += 1,
                    (true, false) => c.P_char += 1,
                    (false, true) => c.G_obj += 1,
                    (false, false) => c.P_obj += 1,
                }
                character
            }
            Placement::Ungrounded => r.class.entity_class != ReferentClass::ObjectLike,
        };
        if character {
            c.T_char += 1;
        } else {
            c.T_obj += 1;
        }
    }
    c
}

fn grounded_fraction(grounded: u32, total: u32) -> f64 {
    if total == 0 {
        1.0
    } else {
        f64::from(grounded) / f64::from(total)
    }
}

/// Weighted grounded fractions; a class with no references counts as fully
/// grounded.
pub fn compute_r_ground(counts: &GroundingCounts, cfg: &RewardConfig) -> f64 {
    cfg.gamma * grounded_fraction(counts.G_char + counts.P_char, counts.T_char)
        + cfg.delta * grounded_fraction(counts.G_obj + counts.P_obj, counts.T_obj)
}

pub fn combine(r_reid: f64, r_ground: f64, cfg: &RewardConfig) -> f64 {
    cfg.w_reid * r_reid + cfg.w_ground * r_ground
}

/// Reward configuration plus lexicon; the single scoring path used by the
/// library, the CLI and the HTTP service.
#[derive(Debug, Clone, Default)]
pub struct Scorer {
    pub config: RewardConfig,
    pub lexicon: Lexicon,
}

impl Scorer {
    pub fn new(config: RewardConfig) -> Self {
        Self {
            config,
            lexicon: Lexicon::default(),
        }
    }

    pub fn with_lexicon(config: RewardConfig, lexicon: Lexicon) -> Self {
        Self { config, lexicon }
    }

    pub fn score(
        &self,
        images: &[ImageMeta],
        is_real: bool,
        cot_text: &str,
        story_text: &str,
    ) -> RewardBreakdown {
        let cfg = &self.config;
        let (report, checked) = check_output(images, cot_text, story_text);
        let Some(checked) = checked else {
            return RewardBreakdown::invalid(cfg, report.violations);
        };
        let frames = images.len();
        let r_char = compute_r_char(&checked.cot, frames);
        let r_obj = compute_r_obj(&checked.cot, frames);
        let r_reid = compute_r_reid(r_char, r_obj, is_real, cfg);
        let counts = count_groundings(&checked.story, &self.lexicon);
        let r_ground = compute_r_ground(&counts, cfg);
        RewardBreakdown {
            valid: true,
            r_char: Some(r_char),
            r_obj: Some(r_obj),
            r_reid: Some(r_reid),
            r_ground: Some(r_ground),
            total: combine(r_reid, r_ground, cfg),
            violations: Vec::new(),
        }
    }
}

/// Scores a generated chain-of-thought and story for `sample`'s images and
/// real/synthetic flag.
pub fn compute_reward(
    sample: &StorySample,
    generated_cot: &str,
    generated_story: &str,
    cfg: &RewardConfig,
) -> RewardBreakdown {
    Scorer::new(*cfg).score(
        &sample.images,
        sample.is_real,
        generated_cot,
        generated_story,
    )
}
