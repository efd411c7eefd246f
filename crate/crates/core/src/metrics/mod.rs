//! Grounding and language metrics for generated stories.

pub mod ap;
pub mod bleu;
pub mod matching;
pub mod persistence;
pub mod pronouns;
pub mod report;
pub mod rouge;

pub use ap::{average_precision_11pt, map_over_stories};
pub use bleu::{bleu4, corpus_bleu4};
pub use matching::{
    grounded_references, match_grounded, match_references, prf, Annotated, ClassCounts, Counts,
    GroundedRef, MatchConfig, MatchResult, Prf,
};
pub use persistence::{persistence_curve, PersistenceCurve};
pub use pronouns::{pronoun_report, PronounReport, PronounStats};
pub use report::{evaluate, EvalItem, EvalReport};
pub use rouge::{lcs_len, rouge_l, RougeScore};

/// Lowercased alphanumeric runs, the tokenization used for BLEU and
/// ROUGE-L over story plain text.
pub fn language_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::language_tokens;

    #[test]
    fn tokens_drop_punctuation() {
        assert_eq!(
            language_tokens("Ana's cup, it FELL!"),
            ["ana", "s", "cup", "it", "fell"]
        );
        assert!(language_tokens(" .. ").is_empty());
    }
}
