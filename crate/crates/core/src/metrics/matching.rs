use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::story::{BoundingBox, CotDocument, EntityClass, EntityId, GroundedStory, TagKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    pub iou_threshold: f64,
    pub require_class_match: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            require_class_match: true,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iou_threshold > 0.0 && self.iou_threshold <= 1.0 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "iou_threshold {} must lie in (0, 1]",
                self.iou_threshold
            )))
        }
    }
}

/// An entity reference from a `gdo` tag, resolved to the entity's box in
/// the tag's frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundedRef {
    pub frame_index: usize,
    pub entity_id: EntityId,
    pub bbox: BoundingBox,
}

impl GroundedRef {
    pub fn class(&self) -> EntityClass {
        self.entity_id.class()
    }
}

/// References in narrative order. Ids without a box in the tag's frame
/// carry no visual evidence and are skipped.
pub fn grounded_references(cot: &CotDocument, story: &GroundedStory) -> Vec<GroundedRef> {
    story
        .tags
        .iter()
        .filter(|t| t.kind == TagKind::EntityRef)
        .flat_map(|t| t.entity_ids.iter().map(move |id| (t.frame_index, *id)))
        .filter_map(|(frame_index, entity_id)| {
            let bbox = *cot.entity(entity_id)?.appearances.get(&frame_index)?;
            Some(GroundedRef {
                frame_index,
                entity_id,
                bbox,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub character: Counts,
    pub object: Counts,
    pub total: Counts,
}

impl ClassCounts {
    pub fn add(&mut self, other: &ClassCounts) {
        self.character.add(other.character);
        self.object.add(other.object);
        self.total.add(other.total);
    }

    fn bucket(&mut self, class: EntityClass) -> &mut Counts {
        if class.is_character() {
            &mut self.character
        } else {
            &mut self.object
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub counts: ClassCounts,
    /// Per predicted reference in narrative order: matched or not.
    pub outcomes: Vec<bool>,
    pub gold_count: usize,
}

/// A parsed output or reference: chain-of-thought plus story.
#[derive(Debug, Clone, Copy)]
pub struct Annotated<'a> {
    pub cot: &'a CotDocument,
    pub story: &'a GroundedStory,
}

/// Greedy one-to-one matching of predicted to gold references within each
/// frame, highest IoU first. A pair qualifies at IoU >= threshold (and the
/// same entity class when required).
pub fn match_references(
    pred: Annotated<'_>,
    gold: Annotated<'_>,
    cfg: &MatchConfig,
) -> Result<MatchResult> {
    let pred_frames = pred.cot.frame_analyses.len();
    let gold_frames = gold.cot.frame_analyses.len();
    if pred_frames != gold_frames {
        return Err(Error::InvalidInput(format!(
            "prediction covers {pred_frames} frames, reference {gold_frames}"
        )));
    }
    let preds = grounded_references(pred.cot, pred.story);
    let golds = grounded_references(gold.cot, gold.story);
    Ok(match_grounded(&preds, &golds, cfg))
}

pub fn match_grounded(
    preds: &[GroundedRef],
    golds: &[GroundedRef],
    cfg: &MatchConfig,
) -> MatchResult {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (pi, p) in preds.iter().enumerate() {
        for (gi, g) in golds.iter().enumerate() {
            if p.frame_index != g.frame_index {
                continue;
            }
            if cfg.require_class_match && p.class() != g.class() {
                continue;
            }
            let iou = p.bbox.iou(&g.bbox);
            if iou >= cfg.iou_threshold {
                candidates.push((iou, pi, gi));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut pred_matched = vec![false; preds.len()];
    let mut gold_matched = vec![false; golds.len()];
    for (_, pi, gi) in candidates {
        if !pred_matched[pi] && !gold_matched[gi] {
            pred_matched[pi] = true;
            gold_matched[gi] = true;
        }
    }

    let mut counts = ClassCounts::default();
    for (p, &hit) in preds.iter().zip(&pred_matched) {
        let bucket = counts.bucket(p.class());
        if hit {
            bucket.tp += 1;
        } else {
            bucket.fp += 1;
        }
    }
    for (g, &hit) in golds.iter().zip(&gold_matched) {
        if !hit {
            counts.bucket(g.class()).fn_ += 1;
        }
    }
    counts.total = Counts {
        tp: counts.character.tp + counts.object.tp,
        fp: counts.character.fp + counts.object.fp,
        fn_: counts.character.fn_ + counts.object.fn_,
    };
    MatchResult {
        counts,
        outcomes: pred_matched,
        gold_count: golds.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1 with `0/0 = 0`.
pub fn prf(counts: Counts) -> Prf {
    let precision = ratio(counts.tp, counts.tp + counts.fp);
    let recall = ratio(counts.tp, counts.tp + counts.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf {
        precision,
        recall,
        f1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, EntitySpec};
    use crate::story::parse_story;

    fn gref(frame: usize, id: &str, b: (i64, i64, i64, i64)) -> GroundedRef {
        GroundedRef {
            frame_index: frame,
            entity_id: id.parse().unwrap(),
            bbox: BoundingBox::new(b.0, b.1, b.2, b.3),
        }
    }

    #[test]
    fn self_match_has_no_errors() {
        let entities = [
            EntitySpec::new("char1", "Ana", &[0, 1, 2]),
            EntitySpec::new("obj1", "cup", &[1]),
        ];
        let cot = fixtures::cot_document(3, &entities);
        let story = parse_story(&fixtures::story_text(3, &entities)).unwrap();
        let a = Annotated {
            cot: &cot,
            story: &story,
        };
        let m = match_references(a, a, &MatchConfig::default()).unwrap();
        assert_eq!(m.counts.total.fp, 0);
        assert_eq!(m.counts.total.fn_, 0);
        assert!(m.counts.total.tp > 0);
        assert!(m.outcomes.iter().all(|&o| o));
    }

    #[test]
    fn frame_mismatch_is_error() {
        let a = fixtures::cot_document(3, &[]);
        let b = fixtures::cot_document(4, &[]);
        let s = GroundedStory::default();
        assert!(match_references(
            Annotated { cot: &a, story: &s },
            Annotated { cot: &b, story: &s },
            &MatchConfig::default()
        )
        .is_err());
    }

    #[test]
    fn disjoint_box_is_false_positive() {
        let m = match_grounded(
            &[gref(0, "char1", (0, 0, 10, 10))],
            &[gref(0, "char1", (100, 100, 120, 120))],
            &MatchConfig::default(),
        );
        assert_eq!(
            (m.counts.total.tp, m.counts.total.fp, m.counts.total.fn_),
            (0, 1, 1)
        );
    }

    #[test]
    fn class_and_frame_gating() {
        let b = (0, 0, 10, 10);
        let m = match_grounded(
            &[gref(0, "obj1", b)],
            &[gref(0, "char1", b)],
            &MatchConfig::default(),
        );
        assert_eq!(m.counts.total.tp, 0);
        let loose = MatchConfig {
            require_class_match: false,
            ..Default::default()
        };
        assert_eq!(
            match_grounded(&[gref(0, "obj1", b)], &[gref(0, "char1", b)], &loose)
                .counts
                .total
                .tp,
            1
        );
        assert_eq!(
            match_grounded(&[gref(1, "char1", b)], &[gref(0, "char1", b)], &loose)
                .counts
                .total
                .tp,
            0
        );
    }

    #[test]
    fn greedy_takes_highest_iou_and_never_reuses_gold() {
        let gold = [gref(0, "char1", (0, 0, 10, 10))];
        let preds = [
            gref(0, "char2", (0, 0, 10, 12)),
            gref(0, "char3", (0, 0, 10, 10)),
        ];
        let m = match_grounded(&preds, &gold, &MatchConfig::default());
        assert_eq!(m.outcomes, vec![false, true]);
        assert_eq!((m.counts.total.tp, m.counts.total.fp), (1, 1));
    }

    #[test]
    fn prf_examples() {
        assert_eq!(prf(Counts::default()), Prf::default());
        let all = prf(Counts {
            tp: 5,
            fp: 0,
            fn_: 0,
        });
        assert_eq!((all.precision, all.recall, all.f1), (1.0, 1.0, 1.0));
        let p = prf(Counts {
            tp: 3,
            fp: 1,
            fn_: 2,
        });
        assert_eq!(p.precision, 0.75);
        assert_eq!(p.recall, 0.6);
        // 2 * 0.75 * 0.6 / 1.35
        assert!((p.f1 - 2.0 / 3.0).abs() < 1e-12);
    }
}
