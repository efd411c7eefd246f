//! Inline grounding markup: `<gdi imageK>` segments wrapping the text for
//! image K, with `<gdo>`, `<gda>` and `<gdl>` tags inside carrying one or
//! more space-separated entity ids.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::entity::EntityId;
use crate::error::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagKind {
    /// `gdi`
    ImageSegment,
    /// `gdo`
    EntityRef,
    /// `gda`
    ActionRef,
    /// `gdl`
    LocationRef,
}

impl TagKind {
    pub fn name(self) -> &'static str {
        match self {
            TagKind::ImageSegment => "gdi",
            TagKind::EntityRef => "gdo",
            TagKind::ActionRef => "gda",
            TagKind::LocationRef => "gdl",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "gdi" => Some(TagKind::ImageSegment),
            "gdo" => Some(TagKind::EntityRef),
            "gda" => Some(TagKind::ActionRef),
            "gdl" => Some(TagKind::LocationRef),
            _ => None,
        }
    }

    /// Entity and action tags count as grounding a reference.
    pub fn grounds(self) -> bool {
        matches!(self, TagKind::EntityRef | TagKind::ActionRef)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingTag {
    pub kind: TagKind,
    /// Empty for image segments.
    pub entity_ids: Vec<EntityId>,
    pub inner_text: String,
    /// Byte range of the whole element, markup included, in the story text.
    pub char_span: Range<usize>,
    /// Byte range of the element's content in `plain_text`.
    pub plain_span: Range<usize>,
    /// Frame of the enclosing image segment (its own frame for `gdi`).
    pub frame_index: usize,
    /// 0 for image segments, +1 per enclosing tag otherwise.
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub frame_index: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroundedStory {
    pub segments: Vec<Segment>,
    /// Tags in document (opening) order.
    pub tags: Vec<GroundingTag>,
    /// Story text with every tag removed, including text between segments.
    pub plain_text: String,
}

impl GroundedStory {
    pub fn image_segments(&self) -> impl Iterator<Item = &GroundingTag> {
        self.tags.iter().filter(|t| t.kind == TagKind::ImageSegment)
    }

    /// Equality ignoring offsets into the original markup, which depend on
    /// whitespace inside tags.
    pub fn same_structure(&self, other: &GroundedStory) -> bool {
        self.segments == other.segments
            && self.plain_text == other.plain_text
            && self.tags.len() == other.tags.len()
            && self.tags.iter().zip(&other.tags).all(|(a, b)| {
                a.kind == b.kind
                    && a.entity_ids == b.entity_ids
                    && a.inner_text == b.inner_text
                    && a.plain_span == b.plain_span
                    && a.frame_index == b.frame_index
                    && a.depth == b.depth
            })
    }
}

struct OpenTag {
    index: usize,
    kind: TagKind,
    start: usize,
}

fn parse_image_ordinal(offset: usize, attr: &str) -> Result<usize, ParseError> {
    let digits = attr.strip_prefix("image").ok_or_else(|| {
        ParseError::story(offset, format!("gdi attribute {attr:?} is not imageK"))
    })?;
    match digits.parse::<usize>() {
        Ok(k)
            if k >= 1 && !digits.starts_with('0') && digits.bytes().all(|b| b.is_ascii_digit()) =>
        {
            Ok(k - 1)
        }
        _ => Err(ParseError::story(
            offset,
            format!("bad image ordinal {attr:?}"),
        )),
    }
}

/// Recognizes `<gdX ...>` or `</gdX>` at `at`. Returns `None` for any
/// other `<`, which is then ordinary text.
fn tag_name_at(text: &str, at: usize) -> Option<(bool, TagKind)> {
    let rest = &text[at..];
    let (closing, rest) = match rest.strip_prefix("</") {
        Some(r) => (true, r),
        None => (false, rest.strip_prefix('<')?),
    };
    let kind = TagKind::from_name(rest.get(..3)?)?;
    let next = rest[3..].chars().next();
    let boundary = match next {
        Some('>') => true,
        Some(c) => !closing && c.is_whitespace(),
        None => true,
    };
    boundary.then_some((closing, kind))
}

/// Parses tagged story text. Malformed markup is an error, never repaired.
pub fn parse_story(story_text: &str) -> Result<GroundedStory, ParseError> {
    let mut plain = String::with_capacity(story_text.len());
    let mut tags: Vec<GroundingTag> = Vec::new();
    let mut stack: Vec<OpenTag> = Vec::new();
    let mut segments_open: Vec<usize> = Vec::new();
    let mut pos = 0;

    while let Some(rel) = story_text[pos..].find('<') {
        let at = pos + rel;
        let Some((closing, kind)) = tag_name_at(story_text, at) else {
            plain.push_str(&story_text[pos..=at]);
            pos = at + 1;
            continue;
        };
        plain.push_str(&story_text[pos..at]);
        let end = story_text[at..]
            .find('>')
            .map(|r| at + r + 1)
            .ok_or_else(|| {
                ParseError::story(at, format!("unterminated <{}> markup", kind.name()))
            })?;

        if closing {
            let open = stack.pop().ok_or_else(|| {
                ParseError::story(at, format!("</{}> without matching open tag", kind.name()))
            })?;
            if open.kind != kind {
                return Err(ParseError::story(
                    at,
                    format!("</{}> closes <{}>", kind.name(), open.kind.name()),
                ));
            }
            let tag = &mut tags[open.index];
            tag.char_span = open.start..end;
            tag.plain_span.end = plain.len();
            tag.inner_text = plain[tag.plain_span.clone()].to_string();
        } else {
            let attrs: Vec<&str> = story_text[at + 1 + 3..end - 1].split_whitespace().collect();
            let (entity_ids, frame_index) = if kind == TagKind::ImageSegment {
                if !stack.is_empty() {
                    return Err(ParseError::story(at, "nested <gdi> segment"));
                }
                let [attr] = attrs[..] else {
                    return Err(ParseError::story(
                        at,
                        "<gdi> takes exactly one imageK attribute",
                    ));
                };
                (Vec::new(), parse_image_ordinal(at, attr)?)
            } else {
                let Some(segment) = stack.first() else {
                    return Err(ParseError::story(
                        at,
                        format!("<{}> outside any <gdi> segment", kind.name()),
                    ));
                };
                if attrs.is_empty() {
                    return Err(ParseError::story(
                        at,
                        format!("<{}> without entity id", kind.name()),
                    ));
                }
                let ids = attrs
                    .iter()
                    .map(|a| {
                        a.parse::<EntityId>()
                            .map_err(|e| ParseError::story(at, e.to_string()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                (ids, tags[segment.index].frame_index)
            };
            if kind == TagKind::ImageSegment {
                segments_open.push(tags.len());
            }
            stack.push(OpenTag {
                index: tags.len(),
                kind,
                start: at,
            });
            tags.push(GroundingTag {
                kind,
                entity_ids,
                inner_text: String::new(),
                char_span: at..end,
                plain_span: plain.len()..plain.len(),
                frame_index,
                depth: stack.len() - 1,
            });
        }
        pos = end;
    }
    plain.push_str(&story_text[pos..]);

    if let Some(open) = stack.last() {
        return Err(ParseError::story(
            open.start,
            format!("unclosed <{}> tag", open.kind.name()),
        ));
    }

    let segments = segments_open
        .into_iter()
        .map(|i| Segment {
            frame_index: tags[i].frame_index,
            text: tags[i].inner_text.clone(),
        })
        .collect();
    Ok(GroundedStory {
        segments,
        tags,
        plain_text: plain,
    })
}

fn open_markup(tag: &GroundingTag) -> String {
    if tag.kind == TagKind::ImageSegment {
        format!("<gdi image{}>", tag.frame_index + 1)
    } else {
        let ids: Vec<String> = tag.entity_ids.iter().map(ToString::to_string).collect();
        format!("<{} {}>", tag.kind.name(), ids.join(" "))
    }
}

/// Renders a story back to canonical markup.
pub fn render_story(story: &GroundedStory) -> String {
    let text = &story.plain_text;
    let mut out = String::with_capacity(text.len() + story.tags.len() * 16);
    let mut pos = 0;
    let mut stack: Vec<&GroundingTag> = Vec::new();

    let close = |out: &mut String, pos: &mut usize, tag: &GroundingTag| {
        out.push_str(&text[*pos..tag.plain_span.end]);
        *pos = tag.plain_span.end;
        out.push_str("</");
        out.push_str(tag.kind.name());
        out.push('>');
    };

    for tag in &story.tags {
        while stack.len() > tag.depth {
            let top = stack.pop().expect("non-empty stack");
            close(&mut out, &mut pos, top);
        }
        out.push_str(&text[pos..tag.plain_span.start]);
        pos = tag.plain_span.start;
        out.push_str(&open_markup(tag));
        stack.push(tag);
    }
    while let Some(top) = stack.pop() {
        close(&mut out, &mut pos, top);
    }
    out.push_str(&text[pos..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_segment_fixture() {
        let s = parse_story("<gdi image1>A man <gdo char1>he</gdo> walks.</gdi>").unwrap();
        assert_eq!(s.segments.len(), 1);
        assert_eq!(s.segments[0].frame_index, 0);
        assert_eq!(s.segments[0].text, "A man he walks.");
        assert_eq!(s.plain_text, "A man he walks.");
        let refs: Vec<_> = s
            .tags
            .iter()
            .filter(|t| t.kind == TagKind::EntityRef)
            .collect();
        assert_eq!(refs.len(), 1);
        assert_eq!(refs[0].entity_ids, vec!["char1".parse().unwrap()]);
        assert_eq!(refs[0].inner_text, "he");
        assert_eq!(refs[0].plain_span, 6..8);
        assert_eq!(refs[0].char_span, 18..37);
        assert_eq!(refs[0].depth, 1);
    }

    #[test]
    fn untagged_text() {
        let s = parse_story("Just words < here.").unwrap();
        assert!(s.segments.is_empty());
        assert!(s.tags.is_empty());
        assert_eq!(s.plain_text, "Just words < here.");
    }

    #[test]
    fn malformed_markup_errors() {
        for bad in [
            "<gdo char1>x",
            "<gdi image1><gdo char1>x</gdi>",
            "<gdo char1>x</gdo>",
            "<gdi image1><gdi image2></gdi></gdi>",
            "<gdi image0>x</gdi>",
            "<gdi img1>x</gdi>",
            "<gdi image1><gdo character1>x</gdo></gdi>",
            "<gdi image1><gdo>x</gdo></gdi>",
            "<gdi image1>x</gdi></gdi>",
            "<gdi image1 x</gdi>",
        ] {
            assert!(parse_story(bad).is_err(), "{bad:?} accepted");
        }
    }

    #[test]
    fn error_offset_points_at_unclosed_tag() {
        match parse_story("<gdi image1>ok <gdo char1>x</gdi>") {
            Err(ParseError::Story { offset, .. }) => assert_eq!(offset, 27),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn group_references_and_nesting() {
        let s = parse_story(
            "<gdi image2><gdo char1 char2>They</gdo> <gda char1>lift <gdo obj1>it</gdo></gda> near <gdl lm1>the tower</gdl>.</gdi>",
        )
        .unwrap();
        let gdo = &s.tags[1];
        assert_eq!(gdo.entity_ids.len(), 2);
        assert_eq!(gdo.frame_index, 1);
        let inner = &s.tags[3];
        assert_eq!(inner.kind, TagKind::EntityRef);
        assert_eq!(inner.depth, 2);
        assert_eq!(s.tags[2].inner_text, "lift it");
        assert_eq!(s.plain_text, "They lift it near the tower.");
    }

    #[test]
    fn render_round_trip_is_canonical() {
        let text = "<gdi image1>A man <gdo char1>he</gdo> walks.</gdi>\n<gdi image2><gda char1><gdo char1></gdo></gda><gdo obj1>x</gdo></gdi>";
        let s = parse_story(text).unwrap();
        assert_eq!(render_story(&s), text);
        assert_eq!(render_story(&GroundedStory::default()), "");
    }

    #[test]
    fn render_normalizes_whitespace_in_tags() {
        let s = parse_story("<gdi   image1><gdo  char1   char2 >they</gdo></gdi>").unwrap();
        let rendered = render_story(&s);
        assert_eq!(rendered, "<gdi image1><gdo char1 char2>they</gdo></gdi>");
        assert!(parse_story(&rendered).unwrap().same_structure(&s));
    }
}
