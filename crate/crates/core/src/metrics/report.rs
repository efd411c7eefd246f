//! Corpus-level evaluation of generated outputs against references.

use serde::{Deserialize, Serialize};

use super::{
    average_precision_11pt, corpus_bleu4, language_tokens, map_over_stories, match_grounded,
    match_references, persistence_curve, prf, pronoun_report, rouge_l, Annotated, ClassCounts,
    MatchConfig, PersistenceCurve, Prf, PronounReport,
};
use crate::error::{Error, Result};
use crate::reward::Lexicon;
use crate::story::{parse_cot, parse_story, CotDocument, GroundedStory, ImageMeta};

/// One story to evaluate: the reference annotation and the generated
/// output, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalItem {
    pub sample_id: String,
    pub images: Vec<ImageMeta>,
    pub gold_cot: String,
    pub gold_story: String,
    pub pred_cot: Option<String>,
    pub pred_story: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unscored {
    pub sample_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassScores {
    pub character: Prf,
    pub object: Prf,
    pub total: Prf,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LanguageScores {
    pub bleu4: f64,
    pub rouge_l: f64,
    pub rouge_l_precision: f64,
    pub rouge_l_recall: f64,
}

/// Grounding scores (pooled counts), mAP over stories with at least one
/// reference grounding, language metrics, and the persistence and pronoun
/// series computed over the generated outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub stories: usize,
    pub unscored: Vec<Unscored>,
    pub counts: ClassCounts,
    pub grounding: ClassScores,
    pub map: Option<f64>,
    pub map_stories: usize,
    pub f1: f64,
    pub language: LanguageScores,
    pub persistence: PersistenceCurve,
    pub pronouns: PronounReport,
}

fn parse_gold(item: &EvalItem) -> Result<(CotDocument, GroundedStory)> {
    let wrap = |e: crate::error::ParseError| {
        Error::InvalidInput(format!(
            "reference for {} does not parse: {e}",
            item.sample_id
        ))
    };
    let cot = parse_cot(&item.gold_cot, &item.images).map_err(wrap)?;
    let story = parse_story(&item.gold_story).map_err(wrap)?;
    Ok((cot, story))
}

fn parse_pred(item: &EvalItem) -> std::result::Result<(CotDocument, GroundedStory), String> {
    let (Some(cot), Some(story)) = (&item.pred_cot, &item.pred_story) else {
        return Err("no generated output".into());
    };
    let cot = parse_cot(cot, &item.images).map_err(|e| e.to_string())?;
    let story = parse_story(story).map_err(|e| e.to_string())?;
    Ok((cot, story))
}

/// Evaluates every item. A reference that fails to parse is an error. A
/// generated output that is missing, fails to parse, or covers a different
/// number of frames counts as making no predictions and is listed in
/// `unscored`.
pub fn evaluate(items: &[EvalItem], cfg: &MatchConfig, lexicon: &Lexicon) -> Result<EvalReport> {
    cfg.validate()?;
    if items.is_empty() {
        return Err(Error::InvalidInput("nothing to evaluate".into()));
    }
    let mut counts = ClassCounts::default();
    let mut aps = Vec::new();
    let mut unscored = Vec::new();
    let mut pred_cots = Vec::new();
    let mut pred_stories = Vec::new();
    let mut bleu_pairs = Vec::new();
    let (mut rp, mut rr, mut rf) = (0.0, 0.0, 0.0);

    for item in items {
        let (gold_cot, gold_story) = parse_gold(item)?;
        let gold = Annotated {
            cot: &gold_cot,
            story: &gold_story,
        };
        let pred = parse_pred(item);
        let result = match &pred {
            Ok((cot, story)) => match_references(Annotated { cot, story }, gold, cfg),
            Err(reason) => Err(Error::InvalidInput(reason.clone())),
        };
        let result = result.unwrap_or_else(|e| {
            unscored.push(Unscored {
                sample_id: item.sample_id.clone(),
                reason: e.to_string(),
            });
            let golds = super::grounded_references(&gold_cot, &gold_story);
            match_grounded(&[], &golds, cfg)
        });
        counts.add(&result.counts);
        if result.gold_count > 0 {
            aps.push(average_precision_11pt(&result.outcomes, result.gold_count));
        }

        let reference = language_tokens(&gold_story.plain_text);
        let candidate = match pred {
            Ok((cot, story)) => {
                let tokens = language_tokens(&story.plain_text);
                pred_cots.push(cot);
                pred_stories.push(story);
                tokens
            }
            Err(_) => Vec::new(),
        };
        let r = rouge_l(&candidate, &reference);
        rp += r.p;
        rr += r.r;
        rf += r.f;
        bleu_pairs.push((candidate, vec![reference]));
    }

    let n = items.len() as f64;
    let grounding = ClassScores {
        character: prf(counts.character),
        object: prf(counts.object),
        total: prf(counts.total),
    };
    Ok(EvalReport {
        stories: items.len(),
        unscored,
        counts,
        grounding,
        map: map_over_stories(&aps).ok(),
        map_stories: aps.len(),
        f1: grounding.total.f1,
        language: LanguageScores {
            bleu4: corpus_bleu4(&bleu_pairs),
            rouge_l: rf / n,
            rouge_l_precision: rp / n,
            rouge_l_recall: rr / n,
        },
        persistence: persistence_curve(&pred_cots),
        pronouns: pronoun_report(&pred_stories, lexicon),
    })
}
