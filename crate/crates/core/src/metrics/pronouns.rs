use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::reward::{reference_tokens, Lexicon, Placement, TokenKind};
use crate::story::GroundedStory;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PronounStats {
    pub total: usize,
    pub grounded: usize,
    pub ungrounded_pct: f64,
}

/// Grounding per pronoun form (lowercased). Only forms that occur appear.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PronounReport {
    pub forms: BTreeMap<String, PronounStats>,
}

impl PronounReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pronoun,total,grounded,ungrounded_pct\n");
        for (form, s) in &self.forms {
            out.push_str(&format!(
                "{form},{},{},{}\n",
                s.total, s.grounded, s.ungrounded_pct
            ));
        }
        out
    }
}

/// Counts each lexicon pronoun inside versus outside `gdo`/`gda` tags.
pub fn pronoun_report(corpus: &[GroundedStory], lexicon: &Lexicon) -> PronounReport {
    let mut forms: BTreeMap<String, PronounStats> = BTreeMap::new();
    for story in corpus {
        for r in reference_tokens(story, lexicon) {
            if r.class.kind != TokenKind::Pronoun {
                continue;
            }
            let entry = forms.entry(Lexicon::key(&r.token.surface)).or_default();
            entry.total += 1;
            if matches!(r.placement, Placement::Grounded { .. }) {
                entry.grounded += 1;
            }
        }
    }
    for s in forms.values_mut() {
        s.ungrounded_pct = 100.0 * (1.0 - s.grounded as f64 / s.total as f64);
    }
    PronounReport { forms }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::story::parse_story;

    fn report(texts: &[&str]) -> PronounReport {
        let stories: Vec<GroundedStory> = texts.iter().map(|t| parse_story(t).unwrap()).collect();
        pronoun_report(&stories, &Lexicon::default())
    }

    #[test]
    fn half_grounded() {
        let r = report(&["<gdi image1><gdo char1>He</gdo> ran. He fell.</gdi>"]);
        let he = r.forms["he"];
        assert_eq!((he.total, he.grounded), (2, 1));
        assert_eq!(he.ungrounded_pct, 50.0);
        assert_eq!(r.forms.len(), 1);
    }

    #[test]
    fn empty_and_saturated() {
        assert!(report(&["<gdi image1>The dog ran.</gdi>"]).forms.is_empty());
        let r = report(&[
            "<gdi image1><gdo char1>She</gdo> lifts <gdo obj1>it</gdo>.</gdi>",
            "<gdi image1><gda char2>they wave</gda></gdi>",
        ]);
        assert_eq!(r.forms.len(), 3);
        assert!(r.forms.values().all(|s| s.ungrounded_pct == 0.0));
        assert!(r.to_csv().contains("she,1,1,0\n"));
    }
}
