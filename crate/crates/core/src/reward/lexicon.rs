//! Token classification for the grounding reward: a closed-class pronoun
//! lexicon plus a capitalization rule for proper nouns.

use std::collections::BTreeSet;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::story::{GroundedStory, TagKind};

const DEFAULT_LEXICON: &str = include_str!("../../data/pronouns.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Pronoun,
    ProperNoun,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferentClass {
    CharacterLike,
    ObjectLike,
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenClass {
    pub kind: TokenKind,
    pub entity_class: ReferentClass,
    pub surface: String,
}

/// Pronoun lexicon, lowercase entries. Loadable from JSON with the keys
/// `character_like` and `object_like`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub character_like: BTreeSet<String>,
    pub object_like: BTreeSet<String>,
}

impl Default for Lexicon {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_LEXICON).expect("bundled lexicon is valid JSON")
    }
}

impl Lexicon {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut lex: Lexicon = serde_json::from_str(text)?;
        lex.character_like = lex
            .character_like
            .iter()
            .map(|w| w.to_lowercase())
            .collect();
        lex.object_like = lex.object_like.iter().map(|w| w.to_lowercase()).collect();
        Ok(lex)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Lexicon key for a surface form: lowercase, with a trailing `'s`
    /// clitic removed.
    pub fn key(surface: &str) -> String {
        let lower = surface.to_lowercase();
        for clitic in ["'s", "\u{2019}s"] {
            if let Some(stem) = lower.strip_suffix(clitic) {
                if !stem.is_empty() {
                    return stem.to_string();
                }
            }
        }
        lower
    }

    pub fn pronoun_class(&self, surface: &str) -> Option<ReferentClass> {
        let key = Self::key(surface);
        if self.character_like.contains(&key) {
            Some(ReferentClass::CharacterLike)
        } else if self.object_like.contains(&key) {
            Some(ReferentClass::ObjectLike)
        } else {
            None
        }
    }

    pub fn classify(&self, surface: &str, sentence_initial: bool) -> TokenClass {
        let (kind, entity_class) = if let Some(class) = self.pronoun_class(surface) {
            (TokenKind::Pronoun, class)
        } else if !sentence_initial && surface.chars().next().is_some_and(char::is_uppercase) {
            (TokenKind::ProperNoun, ReferentClass::Ambiguous)
        } else {
            (TokenKind::Other, ReferentClass::Ambiguous)
        };
        TokenClass {
            kind,
            entity_class,
            surface: surface.to_string(),
        }
    }
}

/// Classifies one token with the bundled lexicon.
pub fn classify_token(surface: &str, sentence_initial: bool) -> TokenClass {
    Lexicon::default().classify(surface, sentence_initial)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    /// Byte range in the plain text.
    pub span: Range<usize>,
    pub sentence_initial: bool,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '\u{2019}'
}

fn is_transparent(c: char) -> bool {
    c.is_whitespace()
        || matches!(
            c,
            '"' | '\'' | '(' | '[' | '\u{201c}' | '\u{201d}' | '\u{2018}' | '\u{2019}' | '*' | '_'
        )
}

/// Splits plain text into word tokens. A token is sentence-initial when it
/// opens the text or a segment, or when the nearest preceding character
/// other than whitespace, quotes and brackets is `.`, `!` or `?`.
pub fn tokenize(plain: &str, segment_starts: &[usize]) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut iter = plain.char_indices().peekable();
    while let Some((start, c)) = iter.next() {
        if !is_word_char(c) {
            continue;
        }
        let mut end = start + c.len_utf8();
        while let Some(&(i, c)) = iter.peek() {
            if !is_word_char(c) {
                break;
            }
            end = i + c.len_utf8();
            iter.next();
        }
        let raw = &plain[start..end];
        let trimmed_front = raw.trim_start_matches(['\'', '\u{2019}']);
        let s = start + (raw.len() - trimmed_front.len());
        let word = trimmed_front.trim_end_matches(['\'', '\u{2019}']);
        if word.is_empty() {
            continue;
        }
        let e = s + word.len();
        let before = plain[..s].trim_end_matches(is_transparent);
        let sentence_initial = before.is_empty()
            || before.ends_with(['.', '!', '?'])
            || segment_starts
                .iter()
                .any(|&p| p <= s && plain[p..s].chars().all(is_transparent));
        tokens.push(Token {
            surface: word.to_string(),
            span: s..e,
            sentence_initial,
        });
    }
    tokens
}

/// Where a reference token sits relative to the grounding markup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Inside a `gdo`/`gda` tag; `character` when any of the innermost
    /// such tag's ids is a character.
    Grounded {
        character: bool,
    },
    /// Only inside a `gdl` tag.
    Location,
    Ungrounded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceToken {
    pub token: Token,
    pub class: TokenClass,
    pub placement: Placement,
}

/// Pronouns and proper nouns of a story with their grounding placement.
pub fn reference_tokens(story: &GroundedStory, lexicon: &Lexicon) -> Vec<ReferenceToken> {
    let segment_starts: Vec<usize> = story.image_segments().map(|t| t.plain_span.start).collect();
    tokenize(&story.plain_text, &segment_starts)
        .into_iter()
        .filter_map(|token| {
            let class = lexicon.classify(&token.surface, token.sentence_initial);
            if class.kind == TokenKind::Other {
                return None;
            }
            let enclosing = story.tags.iter().filter(|t| {
                t.kind != TagKind::ImageSegment
                    && t.plain_span.start <= token.span.start
                    && token.span.start < t.plain_span.end
            });
            let mut grounding = None;
            let mut in_location = false;
            for tag in enclosing {
                if tag.kind.grounds() {
                    if grounding.is_none_or(|(depth, _)| tag.depth > depth) {
                        grounding = Some((tag.depth, tag));
                    }
                } else {
                    in_location = true;
                }
            }
            let placement = match grounding {
                Some((_, tag)) => Placement::Grounded {
                    character: tag.entity_ids.iter().any(|id| id.class().is_character()),
                },
                None if in_location => Placement::Location,
                None => Placement::Ungrounded,
            };
            Some(ReferenceToken {
                token,
                class,
                placement,
            })
        })
        .collect()
}
