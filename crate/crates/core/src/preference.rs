//! Offline DPO preference pairs.
//!
//! Candidates for one sample are ranked by reward; the best and worst form
//! a pair when the gap is at least the minimum margin (0.05 by default).
//! [`dpo_loss`] is the sigmoid DPO objective, provided as a reference for
//! verifying external trainers.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::RewardBreakdown;
use crate::story::ImageMeta;

pub const DEFAULT_MIN_MARGIN: f64 = 0.05;
pub const DEFAULT_DPO_BETA: f64 = 0.1;

/// A scored model output. This is also the JSONL row written by `score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResponse {
    pub sample_id: String,
    #[serde(default)]
    pub candidate: Option<usize>,
    pub is_real: bool,
    #[serde(default)]
    pub images: Vec<ImageMeta>,
    pub cot_text: String,
    pub story_text: String,
    pub reward: RewardBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePair {
    pub sample_id: String,
    pub chosen: CandidateResponse,
    pub rejected: CandidateResponse,
    pub margin: f64,
}

/// Ranking order: higher total first, then lexicographic `(story, cot)`,
/// then candidate index, so the result never depends on input order.
fn rank(a: &CandidateResponse, b: &CandidateResponse) -> Ordering {
    b.reward
        .total
        .total_cmp(&a.reward.total)
        .then_with(|| a.story_text.cmp(&b.story_text))
        .then_with(|| a.cot_text.cmp(&b.cot_text))
        .then_with(|| a.candidate.cmp(&b.candidate))
}

/// Worst candidate: lowest total, ties broken as in [`rank`].
fn rank_worst(a: &CandidateResponse, b: &CandidateResponse) -> Ordering {
    a.reward
        .total
        .total_cmp(&b.reward.total)
        .then_with(|| a.story_text.cmp(&b.story_text))
        .then_with(|| a.cot_text.cmp(&b.cot_text))
        .then_with(|| a.candidate.cmp(&b.candidate))
}

/// Pairs the highest- and lowest-reward candidates. `None` with fewer than
/// two candidates or when the margin is below `min_margin`.
pub fn build_pair(candidates: &[CandidateResponse], min_margin: f64) -> Option<PreferencePair> {
    if candidates.len() < 2 {
        return None;
    }
    let chosen = candidates.iter().min_by(|a, b| rank(a, b))?;
    let rejected = candidates.iter().min_by(|a, b| rank_worst(a, b))?;
    let margin = chosen.reward.total - rejected.reward.total;
    if margin < min_margin {
        return None;
    }
    debug_assert!(chosen.reward.total >= rejected.reward.total);
    Some(PreferencePair {
        sample_id: chosen.sample_id.clone(),
        chosen: chosen.clone(),
        rejected: rejected.clone(),
        margin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpoInputs {
    pub logp_policy_chosen: f64,
    pub logp_policy_rejected: f64,
    pub logp_ref_chosen: f64,
    #[serde(alias = "logp_rejected_ref")]
    pub logp_ref_rejected: f64,
    pub beta: f64,
}

impl DpoInputs {
    /// `beta * ((pi_c - ref_c) - (pi_r - ref_r))`
    pub fn logit(&self) -> f64 {
        self.beta
            * ((self.logp_policy_chosen - self.logp_ref_chosen)
                - (self.logp_policy_rejected - self.logp_ref_rejected))
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `-ln sigmoid(z)` for the DPO logit `z`.
pub fn dpo_loss(inputs: &DpoInputs) -> Result<f64> {
    let values = [
        inputs.logp_policy_chosen,
        inputs.logp_policy_rejected,
        inputs.logp_ref_chosen,
        inputs.logp_ref_rejected,
        inputs.beta,
    ];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("DPO inputs must be finite".into()));
    }
    if inputs.beta <= 0.0 {
        return Err(Error::InvalidInput("DPO beta must be positive".into()));
    }
    let z = inputs.logit();
    if !z.is_finite() {
        return Err(Error::InvalidInput("DPO logit overflowed".into()));
    }
    Ok(softplus(-z))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MarginStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PairSummary {
    pub samples: usize,
    pub pairs: usize,
    pub pair_yield: f64,
    pub real_pairs: usize,
    pub synthetic_pairs: usize,
    pub margin: Option<MarginStats>,
}

fn margin_stats(margins: &mut [f64]) -> Option<MarginStats> {
    if margins.is_empty() {
        return None;
    }
    margins.sort_by(f64::total_cmp);
    let n = margins.len();
    let median = if n % 2 == 1 {
        margins[n / 2]
    } else {
        (margins[n / 2 - 1] + margins[n / 2]) / 2.0
    };
    Some(MarginStats {
        min: margins[0],
        max: margins[n - 1],
        mean: margins.iter().sum::<f64>() / n as f64,
        median,
    })
}

/// Groups candidates by sample id and builds at most one pair per sample.
/// Output is ordered by sample id.
pub fn build_corpus_pairs(
    scored: impl IntoIterator<Item = CandidateResponse>,
    min_margin: f64,
) -> (Vec<PreferencePair>, PairSummary) {
    let mut groups: BTreeMap<String, Vec<CandidateResponse>> = BTreeMap::new();
    for c in scored {
        groups.entry(c.sample_id.clone()).or_default().push(c);
    }
    let pairs: Vec<PreferencePair> = groups
        .values()
        .filter_map(|group| build_pair(group, min_margin))
        .collect();
    let mut margins: Vec<f64> = pairs.iter().map(|p| p.margin).collect();
    let real_pairs = pairs.iter().filter(|p| p.chosen.is_real).count();
    let summary = PairSummary {
        samples: groups.len(),
        pairs: pairs.len(),
        pair_yield: if groups.is_empty() {
            0.0
        } else {
            pairs.len() as f64 / groups.len() as f64
        },
        real_pairs,
        synthetic_pairs: pairs.len() - real_pairs,
        margin: margin_stats(&mut margins),
    };
    (pairs, summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSide {
    pub cot: String,
    pub story: String,
    pub reward: RewardBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptMeta {
    pub is_real: bool,
    pub frame_count: usize,
}

/// JSONL layout of a preference pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub sample_id: String,
    pub images: Vec<ImageMeta>,
    pub prompt_meta: PromptMeta,
    pub chosen: PairSide,
    pub rejected: PairSide,
    pub margin: f64,
}

impl From<&PreferencePair> for PairRecord {
    fn from(p: &PreferencePair) -> Self {
        let side = |c: &CandidateResponse| PairSide {
            cot: c.cot_text.clone(),
            story: c.story_text.clone(),
            reward: c.reward.clone(),
        };
        PairRecord {
            sample_id: p.sample_id.clone(),
            images: p.chosen.images.clone(),
            prompt_meta: PromptMeta {
                is_real: p.chosen.is_real,
                frame_count: p.chosen.images.len(),
            },
            chosen: side(&p.chosen),
            rejected: side(&p.rejected),
            margin: p.margin,
        }
    }
}
