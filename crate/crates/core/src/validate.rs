//! Structural checks gating the reward. Six chain-of-thought rules and two
//! story rules; violations accumulate rather than short-circuit.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::story::{
    parse_cot, parse_story, CotDocument, EntityId, GroundedStory, ImageMeta, StorySample,
    TableCategory, TagKind,
};

pub const NARRATIVE_PHASES: [&str; 5] = [
    "Introduction",
    "Development",
    "Conflict",
    "Turning Point",
    "Conclusion",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleId {
    AnalysisPerImage,
    CharIdFormat,
    ObjIdPrefix,
    BboxBounds,
    Phases,
    TableSchema,
    GdiCount,
    StoryIdUnknown,
    /// Chain-of-thought did not parse.
    CotParse,
    /// Story markup did not parse.
    StoryParse,
    /// No model output was supplied for the sample.
    MissingOutput,
}

impl RuleId {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::AnalysisPerImage => "analysis_per_image",
            RuleId::CharIdFormat => "char_id_format",
            RuleId::ObjIdPrefix => "obj_id_prefix",
            RuleId::BboxBounds => "bbox_bounds",
            RuleId::Phases => "phases",
            RuleId::TableSchema => "table_schema",
            RuleId::GdiCount => "gdi_count",
            RuleId::StoryIdUnknown => "story_id_unknown",
            RuleId::CotParse => "cot_parse",
            RuleId::StoryParse => "story_parse",
            RuleId::MissingOutput => "missing_output",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule_id: RuleId,
    #[serde(default)]
    pub frame_index: Option<usize>,
    #[serde(default)]
    pub entity_id: Option<EntityId>,
    pub message: String,
}

impl Violation {
    pub fn new(rule_id: RuleId, message: impl Into<String>) -> Self {
        Self {
            rule_id,
            frame_index: None,
            entity_id: None,
            message: message.into(),
        }
    }

    fn at_frame(mut self, frame: usize) -> Self {
        self.frame_index = Some(frame);
        self
    }

    fn for_entity(mut self, id: EntityId) -> Self {
        self.entity_id = Some(id);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            valid: violations.is_empty(),
            violations,
        }
    }

    pub fn merge(mut self, other: ValidationReport) -> Self {
        self.violations.extend(other.violations);
        self.valid = self.violations.is_empty();
        self
    }

    pub fn has_rule(&self, rule: RuleId) -> bool {
        self.violations.iter().any(|v| v.rule_id == rule)
    }

    pub fn rules(&self) -> BTreeSet<RuleId> {
        self.violations.iter().map(|v| v.rule_id).collect()
    }
}

pub fn validate_cot(cot: &CotDocument, images: &[ImageMeta]) -> ValidationReport {
    let mut out = Vec::new();

    // 1. one analysis section per image
    let mut seen = vec![0usize; images.len()];
    for fa in &cot.frame_analyses {
        match seen.get_mut(fa.frame_index) {
            Some(n) => *n += 1,
            None => out.push(
                Violation::new(
                    RuleId::AnalysisPerImage,
                    format!(
                        "analysis for frame {} but only {} images",
                        fa.frame_index + 1,
                        images.len()
                    ),
                )
                .at_frame(fa.frame_index),
            ),
        }
    }
    for (frame, n) in seen.iter().enumerate() {
        match n {
            1 => {}
            0 => out.push(
                Violation::new(
                    RuleId::AnalysisPerImage,
                    format!("no analysis for frame {}", frame + 1),
                )
                .at_frame(frame),
            ),
            _ => out.push(
                Violation::new(
                    RuleId::AnalysisPerImage,
                    format!("{n} analyses for frame {}", frame + 1),
                )
                .at_frame(frame),
            ),
        }
    }

    // 2. character ids, 3. object/landmark/background prefixes
    for e in &cot.entities {
        if e.table.admits(e.id.class()) {
            continue;
        }
        let rule = match e.table {
            TableCategory::Characters => RuleId::CharIdFormat,
            _ => RuleId::ObjIdPrefix,
        };
        out.push(
            Violation::new(
                rule,
                format!("{} listed in the {} table", e.id, e.table.heading()),
            )
            .for_entity(e.id),
        );
    }

    // 4. boxes inside their frame
    for e in &cot.entities {
        for (&frame, bbox) in &e.appearances {
            let fits = images.get(frame).is_some_and(|img| bbox.fits(img));
            if !fits {
                out.push(
                    Violation::new(
                        RuleId::BboxBounds,
                        format!("{} box {bbox} outside frame {}", e.id, frame + 1),
                    )
                    .at_frame(frame)
                    .for_entity(e.id),
                );
            }
        }
    }

    // 5. narrative phases, case-insensitive exact set
    let lowered: Vec<String> = cot
        .narrative_phases
        .iter()
        .map(|p| p.to_lowercase())
        .collect();
    for phase in NARRATIVE_PHASES {
        let count = lowered
            .iter()
            .filter(|p| **p == phase.to_lowercase())
            .count();
        if count == 0 {
            out.push(Violation::new(
                RuleId::Phases,
                format!("missing phase {phase:?}"),
            ));
        } else if count > 1 {
            out.push(Violation::new(
                RuleId::Phases,
                format!("phase {phase:?} repeated"),
            ));
        }
    }
    for (raw, low) in cot.narrative_phases.iter().zip(&lowered) {
        if !NARRATIVE_PHASES.iter().any(|p| p.to_lowercase() == *low) {
            out.push(Violation::new(
                RuleId::Phases,
                format!("unknown phase {raw:?}"),
            ));
        }
    }

    // 6. tables with required columns
    for category in TableCategory::ALL {
        match cot.table(category) {
            None => out.push(Violation::new(
                RuleId::TableSchema,
                format!("missing {} table", category.heading()),
            )),
            Some(table) => {
                let has = |name: &str| table.columns.iter().any(|c| c.eq_ignore_ascii_case(name));
                if !has("id") {
                    out.push(Violation::new(
                        RuleId::TableSchema,
                        format!("{} table lacks an ID column", category.heading()),
                    ));
                }
                if !has("name") && !has("description") {
                    out.push(Violation::new(
                        RuleId::TableSchema,
                        format!(
                            "{} table lacks a Name or Description column",
                            category.heading()
                        ),
                    ));
                }
            }
        }
    }

    ValidationReport::from_violations(out)
}

pub fn validate_story(
    story: &GroundedStory,
    cot: &CotDocument,
    images: &[ImageMeta],
) -> ValidationReport {
    let mut out = Vec::new();

    let segments: Vec<_> = story.image_segments().collect();
    if segments.len() != images.len() {
        out.push(Violation::new(
            RuleId::GdiCount,
            format!(
                "{} gdi segments for {} images",
                segments.len(),
                images.len()
            ),
        ));
    }
    for seg in &segments {
        if seg.frame_index >= images.len() {
            out.push(
                Violation::new(
                    RuleId::GdiCount,
                    format!(
                        "segment for image{} but only {} images",
                        seg.frame_index + 1,
                        images.len()
                    ),
                )
                .at_frame(seg.frame_index),
            );
        }
    }

    for tag in story
        .tags
        .iter()
        .filter(|t| t.kind != TagKind::ImageSegment)
    {
        for id in &tag.entity_ids {
            if cot.entity(*id).is_none() {
                out.push(
                    Violation::new(
                        RuleId::StoryIdUnknown,
                        format!(
                            "<{}> references {id}, absent from the chain-of-thought",
                            tag.kind.name()
                        ),
                    )
                    .at_frame(tag.frame_index)
                    .for_entity(*id),
                );
            }
        }
    }

    ValidationReport::from_violations(out)
}

/// A fully checked model output.
#[derive(Debug, Clone)]
pub struct CheckedOutput {
    pub cot: CotDocument,
    pub story: GroundedStory,
}

/// Parses and validates one output. Parse failures are reported as
/// `cot_parse` / `story_parse` violations.
pub fn check_output(
    images: &[ImageMeta],
    cot_text: &str,
    story_text: &str,
) -> (ValidationReport, Option<CheckedOutput>) {
    let cot = parse_cot(cot_text, images);
    let story = parse_story(story_text);
    match (cot, story) {
        (Ok(cot), Ok(story)) => {
            let report = validate_cot(&cot, images).merge(validate_story(&story, &cot, images));
            let checked = report.valid.then_some(CheckedOutput { cot, story });
            (report, checked)
        }
        (cot, story) => {
            let mut violations = Vec::new();
            if let Err(e) = cot {
                violations.push(Violation::new(RuleId::CotParse, e.to_string()));
            }
            if let Err(e) = story {
                violations.push(Violation::new(RuleId::StoryParse, e.to_string()));
            }
            (ValidationReport::from_violations(violations), None)
        }
    }
}

/// Fraction of samples whose own chain-of-thought and story parse and pass
/// both validators.
pub fn well_structured_rate(samples: &[StorySample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("empty corpus".into()));
    }
    let ok = samples
        .iter()
        .filter(|s| check_output(&s.images, &s.cot_text, &s.story_text).0.valid)
        .count();
    Ok(ok as f64 / samples.len() as f64)
}
