//! Deterministic builders for well-formed samples, used by tests, demos and
//! the end-to-end pipeline checks.

use crate::story::{
    render_cot, BoundingBox, CotDocument, EntityClass, EntityId, EntityRecord, FrameAnalysis,
    ImageMeta, RawTable, StorySample, TableCategory,
};
use crate::validate::{RuleId, NARRATIVE_PHASES};

pub const WIDTH: u32 = 640;
pub const HEIGHT: u32 = 480;

pub fn images(n: usize, story_id: &str) -> Vec<ImageMeta> {
    (0..n)
        .map(|i| ImageMeta::new(format!("{story_id}_img{}", i + 1), WIDTH, HEIGHT, story_id))
        .collect()
}

/// An entity with a name and the frames it appears in.
#[derive(Debug, Clone)]
pub struct EntitySpec {
    pub id: EntityId,
    pub name: String,
    pub frames: Vec<usize>,
}

impl EntitySpec {
    pub fn new(id: &str, name: &str, frames: &[usize]) -> Self {
        Self {
            id: id.parse().expect("fixture id is canonical"),
            name: name.to_string(),
            frames: frames.to_vec(),
        }
    }
}

/// Box for entity `slot` in `frame`, always inside a 640x480 image.
pub fn fixture_box(slot: usize, frame: usize) -> BoundingBox {
    let x1 = ((slot * 97 + frame * 13) % 400) as i64;
    let y1 = ((slot * 53 + frame * 29) % 300) as i64;
    BoundingBox::new(x1, y1, x1 + 120, y1 + 150)
}

fn table_for(class: EntityClass) -> TableCategory {
    match class {
        EntityClass::Character => TableCategory::Characters,
        EntityClass::Object => TableCategory::Objects,
        EntityClass::Landmark | EntityClass::Background => TableCategory::Setting,
    }
}

pub fn cot_document(frame_count: usize, entities: &[EntitySpec]) -> CotDocument {
    let records: Vec<EntityRecord> = entities
        .iter()
        .enumerate()
        .map(|(slot, e)| EntityRecord {
            id: e.id,
            display_name: e.name.clone(),
            attributes: Default::default(),
            appearances: e
                .frames
                .iter()
                .filter(|&&f| f < frame_count)
                .map(|&f| (f, fixture_box(slot, f)))
                .collect(),
            table: table_for(e.id.class()),
        })
        .collect();
    let frame_analyses = (0..frame_count)
        .map(|f| FrameAnalysis {
            frame_index: f,
            referenced_entity_ids: records
                .iter()
                .filter(|r| r.appearances.contains_key(&f))
                .map(|r| r.id)
                .collect(),
        })
        .collect();
    let raw_tables = TableCategory::ALL
        .iter()
        .map(|&category| RawTable {
            category,
            columns: vec!["ID".into(), "Name".into()],
            rows: Vec::new(),
            line: 0,
        })
        .collect();
    CotDocument {
        frame_analyses,
        entities: records,
        narrative_phases: NARRATIVE_PHASES.iter().map(|p| p.to_string()).collect(),
        raw_tables,
    }
}

/// Story with one segment per frame. Every entity present in a frame is
/// named in a `gdo` tag; characters are then referred to by a grounded
/// pronoun and objects by a grounded `it`.
pub fn story_text(frame_count: usize, entities: &[EntitySpec]) -> String {
    let mut out = String::new();
    for f in 0..frame_count {
        if f > 0 {
            out.push('\n');
        }
        out.push_str(&format!("<gdi image{}>", f + 1));
        let present: Vec<&EntitySpec> = entities.iter().filter(|e| e.frames.contains(&f)).collect();
        if present.is_empty() {
            out.push_str("The scene is quiet.");
        }
        for (k, e) in present.iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            match e.id.class() {
                EntityClass::Character => out.push_str(&format!(
                    "Then <gdo {id}>{name}</gdo> <gda {id}>looks around</gda>. <gdo {id}>She</gdo> waits.",
                    id = e.id,
                    name = e.name
                )),
                EntityClass::Landmark | EntityClass::Background => out.push_str(&format!(
                    "Behind them is <gdl {id}>the {name}</gdl>.",
                    id = e.id,
                    name = e.name
                )),
                EntityClass::Object => out.push_str(&format!(
                    "Nearby lies <gdo {id}>the {name}</gdo> and <gdo {id}>it</gdo> stays there.",
                    id = e.id,
                    name = e.name
                )),
            }
        }
        out.push_str("</gdi>");
    }
    out
}

/// A fully conforming sample whose reference text is the rendered fixture.
pub fn sample(
    sample_id: &str,
    is_real: bool,
    frame_count: usize,
    entities: &[EntitySpec],
) -> StorySample {
    StorySample {
        sample_id: sample_id.to_string(),
        is_real,
        images: images(frame_count, sample_id),
        cot_text: render_cot(&cot_document(frame_count, entities), frame_count),
        story_text: story_text(frame_count, entities),
    }
}

/// Small deterministic generator (SplitMix64) for fixture variety without a
/// runtime dependency.
#[derive(Debug, Clone)]
pub struct FixtureRng(u64);

impl FixtureRng {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// Random cast over `frame_count` frames: 0..=3 characters and 0..=3
/// objects, each in a random non-empty subset of frames.
pub fn random_entities(rng: &mut FixtureRng, frame_count: usize) -> Vec<EntitySpec> {
    const NAMES: [&str; 4] = ["Ana", "Ben", "Carla", "Dmitri"];
    const THINGS: [&str; 4] = ["cup", "lamp", "car", "letter"];
    let mut out = Vec::new();
    for (prefix, names) in [("char", NAMES), ("obj", THINGS)] {
        let count = rng.below(4);
        for (k, name) in names.iter().enumerate().take(count) {
            let mut frames: Vec<usize> = (0..frame_count).filter(|_| rng.below(2) == 0).collect();
            if frames.is_empty() {
                frames.push(rng.below(frame_count));
            }
            out.push(EntitySpec::new(
                &format!("{prefix}{}", k + 1),
                name,
                &frames,
            ));
        }
    }
    out
}

/// A conforming sample and a copy edited to break exactly one rule.
#[derive(Debug, Clone)]
pub struct RuleFixture {
    pub rule: RuleId,
    pub conforming: StorySample,
    pub violating: StorySample,
}

fn base_cast() -> Vec<EntitySpec> {
    vec![
        EntitySpec::new("char1", "Ana", &[0, 1, 2]),
        EntitySpec::new("char2", "Ben", &[1]),
        EntitySpec::new("obj1", "cup", &[1, 2]),
        EntitySpec::new("lm1", "tower", &[0]),
    ]
}

fn stray_record(id: &str, table: TableCategory) -> EntityRecord {
    EntityRecord {
        id: id.parse().expect("fixture id is canonical"),
        display_name: "stray".into(),
        attributes: Default::default(),
        appearances: Default::default(),
        table,
    }
}

/// One fixture per structural rule, each over a three-frame story.
pub fn single_rule_fixtures() -> Vec<RuleFixture> {
    const FRAMES: usize = 3;
    let cast = base_cast();
    let base = sample("rules", true, FRAMES, &cast);
    let doc = cot_document(FRAMES, &cast);
    let with_doc = |d: CotDocument| render_cot(&d, FRAMES);

    let mut fixtures = Vec::new();
    let mut push = |rule: RuleId, cot_text: String, story_text: String| {
        let mut violating = base.clone();
        violating.sample_id = format!("rules_{rule}");
        violating.cot_text = cot_text;
        violating.story_text = story_text;
        let mut conforming = base.clone();
        conforming.sample_id = format!("rules_{rule}_ok");
        fixtures.push(RuleFixture {
            rule,
            conforming,
            violating,
        });
    };

    let mut d = doc.clone();
    d.frame_analyses.pop();
    push(
        RuleId::AnalysisPerImage,
        with_doc(d),
        base.story_text.clone(),
    );

    let mut d = doc.clone();
    d.entities
        .push(stray_record("obj2", TableCategory::Characters));
    push(RuleId::CharIdFormat, with_doc(d), base.story_text.clone());

    let mut d = doc.clone();
    d.entities
        .push(stray_record("char3", TableCategory::Objects));
    push(RuleId::ObjIdPrefix, with_doc(d), base.story_text.clone());

    let mut d = doc.clone();
    let first = d.entities[0]
        .appearances
        .get_mut(&0)
        .expect("char1 is in frame 1");
    first.x2 = WIDTH as i64 + 25;
    push(RuleId::BboxBounds, with_doc(d), base.story_text.clone());

    let mut d = doc.clone();
    d.narrative_phases.retain(|p| p != "Conflict");
    push(RuleId::Phases, with_doc(d), base.story_text.clone());

    let cot = base
        .cot_text
        .replacen("## Objects\n| ID | Name |", "## Objects\n| ID | Label |", 1);
    push(RuleId::TableSchema, cot, base.story_text.clone());

    let last = base.story_text.rfind("\n<gdi").expect("three segments");
    push(
        RuleId::GdiCount,
        base.cot_text.clone(),
        base.story_text[..last].to_string(),
    );

    let story = base.story_text.replacen(
        "</gdi>",
        " A stranger, <gdo char9>Max</gdo>, passes.</gdi>",
        1,
    );
    push(RuleId::StoryIdUnknown, base.cot_text.clone(), story);

    fixtures
}

const GOLDEN_TEMPLATES: [&str; 10] = [
    "<gdi image1><gdo char1>{A}</gdo> meets <gdo char2>{B}</gdo> near <gdl lm1>the {L}</gdl>.</gdi>\n\
     <gdi image2><gda char1 char2><gdo char1 char2>They</gdo> walk together</gda>.</gdi>\n\
     <gdi image3><gdo char2>{B}</gdo> drops <gdo obj1>the {O}</gdo>; <gdo obj1>it</gdo> rolls away.</gdi>",
    "<gdi image1>Señor <gdo char1>{A}</gdo> says that 3 < 4 is true.</gdi> \
     <gdi image2><gdo char2>{B}</gdo> laughs at <gdo char1>him</gdo>.</gdi>",
    "<gdi image1><gdo char1>{A}</gdo> waits by <gdl lm1>the {L}</gdl>.</gdi>\n<gdi image2></gdi>\n\
     <gdi image3>Later <gdo char1>she</gdo> finds <gdo obj1>a {O}</gdo>.</gdi>",
    "<gdi image1><gda char1>runs past <gdl lm1>the {L}</gdl> holding <gdo obj1>the {O}</gdo></gda>, \
     and <gdo char2>{B}</gdo> follows.</gdi>\n<gdi image2>Both stop.</gdi>",
    "Chapter One\n<gdi image1><gdo char1>{A}</gdo> opens the door.</gdi>\n\n\
     <gdi image2><gdo char2>{B}</gdo> is inside.</gdi>\nThe end.",
    "<gdi image1><gdo char1>{A}</gdo> sees <gdo obj1>the {O}</gdo>.</gdi>\
     <gdi image2><gdo char1>She</gdo> takes <gdo obj1>it</gdo>.</gdi>\
     <gdi image3><gdo char2>{B}</gdo> asks for <gdo obj1>it</gdo>.</gdi>\
     <gdi image4><gdo char1 char2>They</gdo> share <gdo obj1>the {O}</gdo> under <gdl lm1>the {L}</gdl>.</gdi>",
    "<gdi image1>the light fades. <gdo char2>{B}</gdo> <gda char2>lights a candle</gda>.</gdi>",
    "<gdi image1>A note reads <b>closed</b> on <gdl lm1>the {L}</gdl>.</gdi>\n\
     <gdi image2><gdo char1>{A}</gdo> ignores the <gdz> sign and <gda char1>knocks</gda>.</gdi>",
    "<gdi image1>\"Wait,\" <gdo char1>{A}</gdo> says. \"<gdo char2>{B}</gdo>, look!\"</gdi>\n\
     <gdi image2>(<gdo char2>He</gdo> turns.) <gdo obj1>The {O}</gdo> glints.</gdi>\n\
     <gdi image3>Nothing moves.</gdi>",
    "<gdi image1><gdo char1 char2 obj1>Everyone</gdo> gathers at <gdl lm1>the {L}</gdl>.</gdi>\n\
     <gdi image2><gdo char1>{A}</gdo>'s smile fades while <gdo char2>{B}</gdo> <gda char2>waves</gda>.</gdi>",
];

const GOLDEN_CASTS: [[&str; 4]; 5] = [
    ["Ana", "Ben", "cup", "tower"],
    ["Mira", "Tomas", "lantern", "bridge"],
    ["Zoe", "Idris", "map", "lighthouse"],
    ["Lena", "Kofi", "key", "fountain"],
    ["Ruth", "Omar", "letter", "gate"],
];

/// Fifty canonical, valid stories built from hand-written templates. They
/// cover multi-id tags, nesting, empty segments, text between segments,
/// literal `<` and non-grounding angle-bracket markup.
pub fn golden_corpus() -> Vec<StorySample> {
    let mut out = Vec::new();
    for (c, cast) in GOLDEN_CASTS.iter().enumerate() {
        for (t, template) in GOLDEN_TEMPLATES.iter().enumerate() {
            let story = template
                .replace("{A}", cast[0])
                .replace("{B}", cast[1])
                .replace("{O}", cast[2])
                .replace("{L}", cast[3]);
            let frames = story.matches("<gdi ").count();
            let all: Vec<usize> = (0..frames).collect();
            let entities = [
                EntitySpec::new("char1", cast[0], &all),
                EntitySpec::new("char2", cast[1], &all),
                EntitySpec::new("obj1", cast[2], &all),
                EntitySpec::new("lm1", cast[3], &all),
            ];
            let id = format!("golden_{c}_{t}");
            let mut s = sample(&id, true, frames, &entities);
            s.story_text = story;
            out.push(s);
        }
    }
    out
}
